"""Scene files, database documents and the binary snapshot format.

Scene (YAML)::

    room: [0, 0, 20, 30]        # x_min, y_min, x_max, y_max
    wavelength: 0.125
    aps:
      - id: ap1
        wall: bottom            # bottom | right | top | left
        offset: 10.0            # metres from the wall's first corner (default: midpoint)
        antennas: 6
        spacing: 0.0625         # default: wavelength / 2

Database (JSON) carries ``format``, ``version`` and full-precision antenna
coordinates for every receiver.

Snapshot file: ``MSNK`` magic, little-endian ``uint32`` version and header
length, a UTF-8 JSON header (dims, seed, config digest, wavelength, users),
then ``n_total * F`` complex values as interleaved float64 pairs, row-major.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigurationError
from .geometry import (
    AntennaArray,
    ChannelDatabase,
    Point,
    VirtualReceiver,
    Wall,
    build_database,
    rectangle_room,
    wall_ula,
)

DB_FORMAT = "mirrorsink-db"
DB_VERSION = 1
SNAPSHOT_MAGIC = b"MSNK"
SNAPSHOT_VERSION = 1

DEFAULT_WAVELENGTH = 0.125


def load_document(path) -> dict[str, Any]:
    """Read a YAML or JSON mapping, raising ConfigurationError on bad input."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not a valid YAML/JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return doc


def digest(obj: Any) -> str:
    """Short SHA-256 of the canonical JSON form of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def scene_from_dict(doc: dict[str, Any]) -> tuple[ChannelDatabase, float]:
    """Build the database described by a scene mapping; returns ``(db, wavelength)``."""
    try:
        x_min, y_min, x_max, y_max = (float(v) for v in doc["room"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError("scene 'room' must be [x_min, y_min, x_max, y_max]") from exc
    wavelength = float(doc.get("wavelength", DEFAULT_WAVELENGTH))
    if not wavelength > 0:
        raise ConfigurationError("wavelength must be positive")
    walls = {w.id: w for w in rectangle_room(x_min, y_min, x_max, y_max)}
    ap_docs = doc.get("aps") or []
    if not ap_docs:
        raise ConfigurationError("scene lists no APs")
    arrays, ids = [], []
    for i, ap in enumerate(ap_docs):
        wall_id = ap.get("wall")
        if wall_id not in walls:
            raise ConfigurationError(f"AP #{i + 1}: unknown wall {wall_id!r}")
        n = int(ap.get("antennas", 6))
        spacing = float(ap.get("spacing", wavelength / 2))
        arrays.append(wall_ula(walls[wall_id], n, spacing, ap.get("offset")))
        ids.append(str(ap.get("id", f"ap{i + 1}")))
    return build_database(list(walls.values()), arrays, ids), wavelength


def load_scene(path) -> tuple[ChannelDatabase, float]:
    return scene_from_dict(load_document(path))


def db_to_dict(db: ChannelDatabase, wavelength: float | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format": DB_FORMAT,
        "version": DB_VERSION,
        "paths_per_ap": db.L,
        "room": [{"id": w.id, "a": list(w.a), "b": list(w.b)} for w in db.room],
        "aps": [
            {
                "id": ap_id,
                "receivers": [
                    {
                        "path_index": r.path_index,
                        "source_wall": r.source_wall,
                        "antennas": r.array.positions.tolist(),
                    }
                    for r in receivers
                ],
            }
            for ap_id, receivers in db.aps
        ],
    }
    if wavelength is not None:
        doc["wavelength"] = wavelength
    return doc


def db_from_dict(doc: dict[str, Any]) -> ChannelDatabase:
    if doc.get("format") != DB_FORMAT:
        raise ConfigurationError(f"not a {DB_FORMAT} document")
    if doc.get("version") != DB_VERSION:
        raise ConfigurationError(f"unsupported database version {doc.get('version')!r}")
    try:
        room = tuple(Wall(Point(*w["a"]), Point(*w["b"]), w["id"]) for w in doc["room"])
        aps = tuple(
            (
                ap["id"],
                tuple(
                    VirtualReceiver(ap["id"], r["source_wall"], AntennaArray(r["antennas"]), r["path_index"])
                    for r in ap["receivers"]
                ),
            )
            for ap in doc["aps"]
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed database document: {exc}") from exc
    return ChannelDatabase(room, aps)


def save_db(db: ChannelDatabase, path, wavelength: float | None = None) -> None:
    Path(path).write_text(json.dumps(db_to_dict(db, wavelength), indent=1) + "\n", encoding="utf-8")


def load_db(path) -> tuple[ChannelDatabase, float | None]:
    doc = load_document(path)
    return db_from_dict(doc), doc.get("wavelength")


def write_snapshots(path, data: np.ndarray, header: dict[str, Any]) -> None:
    data = np.asarray(data, dtype=np.complex128)
    if data.ndim != 2:
        raise ValueError("snapshot data must be a 2-D matrix")
    header = {**header, "rows": data.shape[0], "cols": data.shape[1]}
    blob = json.dumps(header, sort_keys=True, default=_jsonable).encode()
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<II", SNAPSHOT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(data.astype("<c16").tobytes(order="C"))


def read_snapshots(path) -> tuple[np.ndarray, dict[str, Any]]:
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ConfigurationError(f"{path}: not a snapshot file")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != SNAPSHOT_VERSION:
        raise ConfigurationError(f"{path}: unsupported snapshot version {version}")
    header = json.loads(raw[12 : 12 + hlen])
    rows, cols = header["rows"], header["cols"]
    body = raw[12 + hlen :]
    if len(body) != rows * cols * 16:
        raise ConfigurationError(f"{path}: truncated snapshot payload")
    data = np.frombuffer(body, dtype="<c16").reshape(rows, cols).astype(np.complex128)
    return data, header
