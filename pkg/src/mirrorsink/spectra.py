"""Spatial spectra over a rectangular search grid.

Generalized MUSIC uses the database (direct plus mirror receivers) and
treats the reflection coefficient as a nuisance parameter chosen per node.
MVDR and the matched filter see only the direct-path steering vector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError
from .geometry import AntennaArray, ChannelDatabase
from .signal_model import direct_steering_grid, effective_steering, stacked_steering_grid
from .subspace import NoiseProjector

DENOMINATOR_FLOOR = 1e-300
NUISANCE_TOL = 1e-12
_CHUNK = 16384


class Method(enum.Enum):
    MUSIC_EST = "music"
    MUSIC_KNOWN = "music-known"
    MVDR = "mvdr"
    MF = "mf"

    @property
    def label(self) -> str:
        return self.name

    @property
    def uses_database(self) -> bool:
        return self in (Method.MUSIC_EST, Method.MUSIC_KNOWN)


@dataclass(frozen=True)
class MethodSpec:
    kind: Method
    gamma: complex | None = None
    gamma_mode: str = "real"
    clamp: bool = True
    gamma_formula: str = "minimizer"

    def __post_init__(self):
        object.__setattr__(self, "kind", Method(self.kind))
        if self.kind is Method.MUSIC_KNOWN and self.gamma is None:
            raise ConfigurationError("MUSIC with known gamma needs a gamma value")
        if self.gamma_mode not in ("real", "complex"):
            raise ConfigurationError(f"gamma_mode must be 'real' or 'complex', not {self.gamma_mode!r}")
        if self.gamma_formula not in ("minimizer", "ratio"):
            raise ConfigurationError(f"unknown gamma_formula {self.gamma_formula!r}")

    @property
    def label(self) -> str:
        return self.kind.label

    @classmethod
    def music(cls, mode: str = "real", clamp: bool = True) -> "MethodSpec":
        return cls(Method.MUSIC_EST, gamma_mode=mode, clamp=clamp)

    @classmethod
    def music_known(cls, gamma: complex) -> "MethodSpec":
        return cls(Method.MUSIC_KNOWN, gamma=complex(gamma))

    @classmethod
    def mvdr(cls) -> "MethodSpec":
        return cls(Method.MVDR)

    @classmethod
    def mf(cls) -> "MethodSpec":
        return cls(Method.MF)


@dataclass(frozen=True)
class GridSpec:
    """Node ``(i, j)`` sits at ``(x0 + i*dx, y0 + j*dy)``; values are stored ``(ny, nx)``."""

    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigurationError("grid needs at least one node per axis")
        if self.dx <= 0 or self.dy <= 0:
            raise ConfigurationError("grid spacing must be positive")

    @classmethod
    def covering(cls, bounds, spacing: float, dy: float | None = None) -> "GridSpec":
        """Grid over ``(x_min, y_min, x_max, y_max)`` including both endpoints."""
        x_min, y_min, x_max, y_max = bounds
        dy = spacing if dy is None else dy
        nx = int(math.floor((x_max - x_min) / spacing + 1e-9)) + 1
        ny = int(math.floor((y_max - y_min) / dy + 1e-9)) + 1
        return cls(float(x_min), float(y_min), float(spacing), float(dy), nx, ny)

    @classmethod
    def single(cls, p) -> "GridSpec":
        return cls(float(p[0]), float(p[1]), 1.0, 1.0, 1, 1)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def xs(self) -> np.ndarray:
        return np.round(self.x0 + np.arange(self.nx) * self.dx, 9)

    @property
    def ys(self) -> np.ndarray:
        return np.round(self.y0 + np.arange(self.ny) * self.dy, 9)

    def points(self) -> np.ndarray:
        """All nodes as ``(ny*nx, 2)``, row-major (x varies fastest)."""
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    def node(self, index: int) -> tuple[float, float]:
        j, i = divmod(int(index), self.nx)
        return float(self.xs[i]), float(self.ys[j])

    def index_of(self, p) -> int:
        i = int(round((p[0] - self.x0) / self.dx))
        j = int(round((p[1] - self.y0) / self.dy))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"point {tuple(p)} is outside the grid")
        return j * self.nx + i


@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    grid: GridSpec
    values: np.ndarray
    method: MethodSpec
    gamma_map: np.ndarray | None = field(default=None)

    @property
    def x0(self) -> float:
        return self.grid.x0

    @property
    def y0(self) -> float:
        return self.grid.y0

    @property
    def dx(self) -> float:
        return self.grid.dx

    @property
    def dy(self) -> float:
        return self.grid.dy

    @property
    def nx(self) -> int:
        return self.grid.nx

    @property
    def ny(self) -> int:
        return self.grid.ny

    def argmax(self) -> int:
        # np.argmax returns the first occurrence, i.e. the smallest linear index
        return int(np.argmax(self.values.ravel()))


class GammaEstimate(NamedTuple):
    value: complex | float | np.ndarray
    identifiable: bool | np.ndarray


def _forms(a0, a1, W):
    """``(a0^H W a0, a0^H W a1, a1^H W a1)`` row-wise."""
    if isinstance(W, NoiseProjector):
        p0 = a0 @ W.basis.conj()
        p1 = a1 @ W.basis.conj()
        q00 = np.sum(p0.real**2 + p0.imag**2, axis=-1)
        q11 = np.sum(p1.real**2 + p1.imag**2, axis=-1)
        q01 = np.sum(p0.conj() * p1, axis=-1)
        return q00, q01, q11
    W = np.asarray(W)
    Wa0 = a0 @ W.T
    Wa1 = a1 @ W.T
    return (
        np.sum(a0.conj() * Wa0, axis=-1).real,
        np.sum(a0.conj() * Wa1, axis=-1),
        np.sum(a1.conj() * Wa1, axis=-1).real,
    )


def gamma_hat(a0, a1, W, mode: str = "real", clamp: bool = True) -> GammaEstimate:
    """Reflection coefficient minimising ``(a0 + g a1)^H W (a0 + g a1)``.

    Real mode: ``-Re(a0^H W a1) / (a1^H W a1)``; complex mode:
    ``-(a1^H W a0) / (a1^H W a1)``.  With ``clamp`` the real estimate is
    limited to [-1, 1] and the complex one to the unit disc, which is the
    constrained minimiser since the objective is a convex quadratic.  When
    ``a1^H W a1`` vanishes (relative to ``|a1|^2``) the nuisance is not
    identifiable and 0 is returned with ``identifiable=False``.

    Works on single vectors or row-stacked batches.
    """
    a0 = np.asarray(a0, dtype=complex)
    a1 = np.asarray(a1, dtype=complex)
    _, q01, q11 = _forms(a0, a1, W)
    a1_energy = np.sum(a1.real**2 + a1.imag**2, axis=-1)
    ok = q11 > NUISANCE_TOL * np.maximum(a1_energy, 1e-300)
    safe = np.where(ok, q11, 1.0)
    if mode == "real":
        g = np.where(ok, -q01.real / safe, 0.0)
        if clamp:
            g = np.clip(g, -1.0, 1.0)
    elif mode == "complex":
        g = np.where(ok, -np.conj(q01) / safe, 0.0)
        if clamp:
            mag = np.abs(g)
            g = np.where(mag > 1.0, g / np.maximum(mag, 1.0), g)
    else:
        raise ConfigurationError(f"gamma mode must be 'real' or 'complex', not {mode!r}")
    if np.ndim(g) == 0:
        return GammaEstimate(g.item(), bool(ok))
    return GammaEstimate(g, ok)


def gamma_hat_ratio(a0, a1, W) -> np.ndarray | float:
    """Alternative closed form ``Re(a0^H W a1) / (a0^H W a0)``.

    It does not minimise the MUSIC denominator; kept only to compare against
    :func:`gamma_hat`.
    """
    a0 = np.asarray(a0, dtype=complex)
    a1 = np.asarray(a1, dtype=complex)
    q00, q01, _ = _forms(a0, a1, W)
    g = q01.real / np.maximum(q00, DENOMINATOR_FLOOR)
    return g.item() if np.ndim(g) == 0 else g


def music_denominator(a0, a1, W: NoiseProjector, gamma) -> np.ndarray:
    return W.energy(effective_steering(a0, a1, gamma))


def _music_rows(a0, a1, W: NoiseProjector, method: MethodSpec):
    if method.kind is Method.MUSIC_KNOWN:
        g = np.full(a0.shape[0], complex(method.gamma))
    elif method.gamma_formula == "ratio":
        g = np.asarray(gamma_hat_ratio(a0, a1, W), dtype=complex).reshape(-1)
    else:
        g = np.asarray(gamma_hat(a0, a1, W, method.gamma_mode, method.clamp).value).reshape(-1)
    if not np.any(np.imag(g)):
        g = np.real(g)
    abar = effective_steering(a0, a1, g)
    num = np.sum(abar.real**2 + abar.imag**2, axis=-1)
    den = np.maximum(W.energy(abar), DENOMINATOR_FLOOR)
    return num / den, g


def music_value(u, db: ChannelDatabase, W: NoiseProjector, wavelength: float, method: MethodSpec | None = None) -> float:
    """``abar^H abar / abar^H W abar`` at ``u`` with known or estimated gamma."""
    method = MethodSpec.music() if method is None else method
    if not method.kind.uses_database:
        raise ConfigurationError(f"{method.label} is not a MUSIC method")
    a0, a1 = stacked_steering_grid(db, [u], wavelength)
    values, _ = _music_rows(a0, a1, W, method)
    return float(values[0])


def mvdr_value(u, direct_arrays: Sequence[AntennaArray], R_inv: np.ndarray, wavelength: float) -> float:
    """``1 / (a0^H R^-1 a0)`` using only the direct-path steering vector."""
    a0 = direct_steering_grid(direct_arrays, [u], wavelength)
    return float(_mvdr_rows(a0, R_inv)[0])


def mf_value(u, direct_arrays: Sequence[AntennaArray], R: np.ndarray, wavelength: float) -> float:
    """Matched-filter power ``a0^H R a0``."""
    a0 = direct_steering_grid(direct_arrays, [u], wavelength)
    return float(_mf_rows(a0, getattr(R, "matrix", R))[0])


def _quad(A, M):
    return np.sum(A.conj() * (A @ M.T), axis=-1).real


def _mvdr_rows(a0, R_inv):
    return 1.0 / np.maximum(_quad(a0, np.asarray(R_inv)), DENOMINATOR_FLOOR)


def _mf_rows(a0, R):
    return np.maximum(_quad(a0, np.asarray(R)), 0.0)


class SteeringCache:
    """Precomputed ``a0``/``a1`` rows for every node of one grid.

    The cache depends only on database, grid and wavelength, so one
    instance serves every trial and every gamma of a sweep.
    """

    def __init__(self, db: ChannelDatabase, grid: GridSpec, wavelength: float):
        self.db = db
        self.grid = grid
        self.wavelength = wavelength
        self.points = grid.points()
        self.a0, self.a1 = stacked_steering_grid(db, self.points, wavelength, strict=False)

    def rows(self, indices) -> tuple[np.ndarray, np.ndarray]:
        return self.a0[indices], self.a1[indices]


def compute_spectrum(
    method: MethodSpec,
    db: ChannelDatabase,
    grid: GridSpec,
    wavelength: float,
    *,
    projector: NoiseProjector | None = None,
    covariance=None,
    inverse: np.ndarray | None = None,
    cache: SteeringCache | None = None,
) -> SpectrumGrid:
    """Evaluate ``method`` at every node of ``grid``.

    MUSIC variants need ``projector``; MVDR needs ``inverse``; MF needs
    ``covariance``.  Nodes are processed in fixed-size chunks, so the result
    does not depend on how the grid is later partitioned for display.
    """
    if cache is not None and (cache.grid != grid or cache.db is not db or cache.wavelength != wavelength):
        raise ConfigurationError("steering cache was built for a different grid/database")
    n = db.n_total
    points = cache.points if cache is not None else grid.points()
    out = np.empty(grid.size)
    gmap = np.empty(grid.size, dtype=complex) if method.kind is Method.MUSIC_EST else None

    if method.kind.uses_database:
        if projector is None:
            raise ConfigurationError(f"{method.label} needs a noise projector")
        if projector.size != n:
            raise ConfigurationError("projector size does not match the database")
    elif method.kind is Method.MVDR:
        if inverse is None:
            raise ConfigurationError("MVDR needs an inverse covariance")
        if np.shape(inverse) != (n, n):
            raise ConfigurationError("inverse covariance size does not match the database")
    else:
        if covariance is None:
            raise ConfigurationError("MF needs a covariance")
        covariance = np.asarray(getattr(covariance, "matrix", covariance))
        if covariance.shape != (n, n):
            raise ConfigurationError("covariance size does not match the database")

    for start in range(0, grid.size, _CHUNK):
        sl = slice(start, min(start + _CHUNK, grid.size))
        if cache is not None:
            a0, a1 = cache.a0[sl], cache.a1[sl]
        elif method.kind.uses_database:
            a0, a1 = stacked_steering_grid(db, points[sl], wavelength, strict=False)
        else:
            a0 = direct_steering_grid(db.direct_arrays(), points[sl], wavelength, strict=False)
        if method.kind.uses_database:
            out[sl], g = _music_rows(a0, a1, projector, method)
            if gmap is not None:
                gmap[sl] = g
        elif method.kind is Method.MVDR:
            out[sl] = _mvdr_rows(a0, inverse)
        else:
            out[sl] = _mf_rows(a0, covariance)

    if gmap is not None and method.gamma_mode == "real":
        gmap = gmap.real
    return SpectrumGrid(
        grid,
        out.reshape(grid.ny, grid.nx),
        method,
        None if gmap is None else gmap.reshape(grid.ny, grid.nx),
    )
