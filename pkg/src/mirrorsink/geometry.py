"""Room geometry and the location section of the channel database.

Each access point (AP) is a linear antenna array mounted on a wall.  A wall
reflection is modelled by a *virtual receiver*: the AP array mirrored across
the wall line with its antenna order reversed.  The sum of the responses at
the direct and virtual arrays equals what the physical array sees through
single-bounce multipath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, GeometryError

#: Distance below which an antenna counts as mounted on a wall.
ON_WALL_TOL = 1e-9


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Wall:
    a: Point
    b: Point
    id: str

    def __post_init__(self):
        a, b = Point(*map(float, self.a)), Point(*map(float, self.b))
        if not all(math.isfinite(v) for v in (*a, *b)):
            raise GeometryError(f"wall {self.id!r} has non-finite endpoints")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    def direction(self) -> np.ndarray:
        """Unit vector from ``a`` to ``b``."""
        if self.length == 0.0:
            raise GeometryError(f"wall {self.id!r} is degenerate (a == b)")
        d = np.subtract(self.b, self.a)
        return d / np.linalg.norm(d)

    def line_distance(self, points) -> np.ndarray:
        """Unsigned distance from ``points`` (..., 2) to the infinite wall line."""
        p = np.asarray(points, dtype=float) - np.asarray(self.a)
        t = self.direction()
        return np.abs(p[..., 0] * t[1] - p[..., 1] * t[0])

    def segment_distance(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        a = np.asarray(self.a)
        d = np.subtract(self.b, self.a)
        s = np.clip(((p - a) @ d) / (d @ d), 0.0, 1.0)
        return np.linalg.norm(p - (a + s[..., None] * d), axis=-1)


@dataclass(frozen=True, eq=False)
class AntennaArray:
    """Ordered antenna positions, stored as an ``(N, 2)`` float array."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        if len(pos) == 0:
            raise GeometryError("an antenna array needs at least one antenna")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("antenna coordinates must be finite")
        if len(pos) > 1:
            gaps = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
            if np.any(gaps[np.triu_indices(len(pos), 1)] == 0.0):
                raise GeometryError("antenna positions must be distinct")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def antennas(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self.positions]

    @property
    def centroid(self) -> Point:
        return Point(*self.positions.mean(axis=0))

    def translated(self, dx: float, dy: float) -> "AntennaArray":
        return AntennaArray(self.positions + np.array([dx, dy]))

    def __eq__(self, other):
        if not isinstance(other, AntennaArray):
            return NotImplemented
        return np.array_equal(self.positions, other.positions)

    def __hash__(self):
        return hash(self.positions.tobytes())


@dataclass(frozen=True)
class VirtualReceiver:
    ap_id: str
    source_wall: str | None
    array: AntennaArray
    path_index: int

    def __post_init__(self):
        if self.path_index < 1:
            raise ConfigurationError("path_index must be >= 1")
        if (self.path_index == 1) != (self.source_wall is None):
            raise ConfigurationError(
                "path_index 1 is reserved for the direct receiver (source_wall None)"
            )


@dataclass(frozen=True)
class ChannelDatabase:
    """Walls plus, per AP, the direct receiver followed by its mirror receivers."""

    room: tuple[Wall, ...]
    aps: tuple[tuple[str, tuple[VirtualReceiver, ...]], ...]
    _centroid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "room", tuple(self.room))
        object.__setattr__(self, "aps", tuple((i, tuple(r)) for i, r in self.aps))
        if not self.aps:
            raise ConfigurationError("database has no access points")
        lengths = set()
        for ap_id, receivers in self.aps:
            if [r.path_index for r in receivers] != list(range(1, len(receivers) + 1)):
                raise ConfigurationError(f"AP {ap_id!r}: path indices must be 1..L")
            if any(r.ap_id != ap_id for r in receivers):
                raise ConfigurationError(f"AP {ap_id!r}: receiver ap_id mismatch")
            n = {len(r.array) for r in receivers}
            if len(n) != 1:
                raise ConfigurationError(f"AP {ap_id!r}: receivers differ in antenna count")
            lengths.add(len(receivers))
        if len(lengths) != 1:
            raise ConfigurationError("all APs must carry the same number of paths L")
        corners = (
            np.array([[*w.a, *w.b] for w in self.room]).reshape(-1, 2)
            if self.room
            else np.zeros((1, 2))
        )
        object.__setattr__(self, "_centroid", corners.mean(axis=0))

    @property
    def L(self) -> int:
        return len(self.aps[0][1])

    @property
    def ap_ids(self) -> list[str]:
        return [ap_id for ap_id, _ in self.aps]

    @property
    def antennas_per_ap(self) -> list[int]:
        return [len(receivers[0].array) for _, receivers in self.aps]

    @property
    def n_total(self) -> int:
        return sum(self.antennas_per_ap)

    def receivers(self, ap_id: str) -> tuple[VirtualReceiver, ...]:
        return dict(self.aps)[ap_id]

    def direct_arrays(self) -> list[AntennaArray]:
        return [receivers[0].array for _, receivers in self.aps]

    def bounds(self) -> tuple[float, float, float, float]:
        """Bounding box ``(x_min, y_min, x_max, y_max)`` of the walls."""
        pts = np.array([[*w.a] for w in self.room] + [[*w.b] for w in self.room])
        return (*pts.min(axis=0), *pts.max(axis=0))

    def contains(self, p, strict: bool = False) -> bool:
        """Point-in-room test for convex rooms."""
        if not self.room:
            return True
        for w in self.room:
            if _signed_side(w, p) * _signed_side(w, self._centroid) < 0:
                return False
            if strict and w.line_distance(p) <= ON_WALL_TOL:
                return False
        return True

    def translated(self, dx: float, dy: float) -> "ChannelDatabase":
        room = [
            Wall(Point(w.a.x + dx, w.a.y + dy), Point(w.b.x + dx, w.b.y + dy), w.id)
            for w in self.room
        ]
        aps = [
            (
                ap_id,
                [
                    VirtualReceiver(r.ap_id, r.source_wall, r.array.translated(dx, dy), r.path_index)
                    for r in receivers
                ],
            )
            for ap_id, receivers in self.aps
        ]
        return ChannelDatabase(tuple(room), tuple(aps))


def _signed_side(w: Wall, p) -> float:
    t = np.subtract(w.b, w.a)
    q = np.subtract(p, w.a)
    return float(t[0] * q[1] - t[1] * q[0])


def mirror_point(p, w: Wall) -> Point:
    """Reflect ``p`` across the infinite line through ``w``."""
    t = w.direction()
    a = np.asarray(w.a)
    v = np.asarray(p, dtype=float) - a
    foot = a + (v @ t) * t
    return Point(*(2.0 * foot - np.asarray(p, dtype=float)))


def mirror_points(points: np.ndarray, w: Wall) -> np.ndarray:
    t = w.direction()
    a = np.asarray(w.a)
    v = np.asarray(points, dtype=float) - a
    foot = a + (v @ t)[..., None] * t
    return 2.0 * foot - np.asarray(points, dtype=float)


def build_virtual_receiver(
    ap_array: AntennaArray, w: Wall, l: int, ap_id: str = "ap"
) -> VirtualReceiver:
    """Mirror every antenna across ``w`` and reverse the antenna order.

    Antenna ``k`` of the virtual array is the image of physical antenna
    ``N - 1 - k`` (zero-based).
    """
    if l < 2:
        raise ConfigurationError("virtual receivers use path indices l >= 2")
    mirrored = mirror_points(ap_array.positions, w)[::-1]
    return VirtualReceiver(ap_id, w.id, AntennaArray(mirrored), l)


def host_walls(array: AntennaArray, room: Iterable[Wall], tol: float = ON_WALL_TOL) -> list[Wall]:
    """Walls whose segment passes within ``tol`` of any antenna of ``array``."""
    return [w for w in room if np.any(w.segment_distance(array.positions) <= tol)]


def build_database(
    room: Sequence[Wall],
    aps: Sequence[AntennaArray],
    ap_ids: Sequence[str] | None = None,
) -> ChannelDatabase:
    """Build the location section: one direct plus one mirror receiver per non-host wall."""
    room = tuple(room)
    if not room:
        raise ConfigurationError("room has no walls")
    for w in room:
        w.direction()
    if len({w.id for w in room}) != len(room):
        raise ConfigurationError("wall ids must be unique")
    if not aps:
        raise ConfigurationError("at least one AP is required")
    ap_ids = list(ap_ids) if ap_ids is not None else [f"ap{i + 1}" for i in range(len(aps))]
    if len(ap_ids) != len(aps) or len(set(ap_ids)) != len(ap_ids):
        raise ConfigurationError("AP ids must be unique and match the AP list")

    entries = []
    for ap_id, array in zip(ap_ids, aps):
        hosts = host_walls(array, room)
        if len(hosts) != 1:
            where = "no wall" if not hosts else "walls " + ", ".join(w.id for w in hosts)
            raise ConfigurationError(f"AP {ap_id!r} must sit on exactly one wall, found {where}")
        receivers = [VirtualReceiver(ap_id, None, array, 1)]
        for w in room:
            if w is hosts[0]:
                continue
            receivers.append(build_virtual_receiver(array, w, len(receivers) + 1, ap_id))
        entries.append((ap_id, tuple(receivers)))

    db = ChannelDatabase(room, tuple(entries))
    for ap_id, receivers in db.aps:
        for r in receivers[1:]:
            if any(db.contains(p) for p in r.array.positions):
                raise ConfigurationError(
                    f"virtual receiver of {ap_id!r} off wall {r.source_wall!r} falls inside "
                    "the room; only convex rooms are supported"
                )
    return db


def rectangle_room(x_min: float, y_min: float, x_max: float, y_max: float) -> list[Wall]:
    """Counter-clockwise walls ``bottom, right, top, left``."""
    if not (x_max > x_min and y_max > y_min):
        raise ConfigurationError("rectangle needs x_max > x_min and y_max > y_min")
    c = [Point(x_min, y_min), Point(x_max, y_min), Point(x_max, y_max), Point(x_min, y_max)]
    names = ["bottom", "right", "top", "left"]
    return [Wall(c[i], c[(i + 1) % 4], names[i]) for i in range(4)]


def wall_ula(wall: Wall, n: int, spacing: float, offset: float | None = None) -> AntennaArray:
    """Uniform linear array lying along ``wall``, centred ``offset`` metres from ``wall.a``.

    The default offset is the wall midpoint.  Antennas are ordered from the
    ``a`` end towards the ``b`` end.
    """
    if n < 1:
        raise ConfigurationError("antenna count must be >= 1")
    if spacing <= 0:
        raise ConfigurationError("antenna spacing must be positive")
    offset = wall.length / 2 if offset is None else float(offset)
    half = (n - 1) * spacing / 2
    if offset - half < 0 or offset + half > wall.length:
        raise ConfigurationError(f"array of {n} antennas does not fit on wall {wall.id!r}")
    t = wall.direction()
    steps = offset + (np.arange(n) - (n - 1) / 2) * spacing
    return AntennaArray(np.asarray(wall.a) + steps[:, None] * t)

