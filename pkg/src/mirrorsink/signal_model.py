"""Near-field steering vectors and multi-user multipath snapshot synthesis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, GeometryError
from .geometry import AntennaArray, ChannelDatabase, Point
from .io import DEFAULT_WAVELENGTH, digest


def gamma_from_db(gamma_db: float, phase_deg: float = 180.0) -> complex:
    """Reflection coefficient with amplitude ``10**(dB/20)``.

    The default phase of 180 degrees gives the negative-real convention used
    by the sweeps, so ``-7`` dB maps to ``-0.4467``.
    """
    amp = 10.0 ** (gamma_db / 20.0)
    if phase_deg == 180.0:
        return complex(-amp, 0.0)
    if phase_deg == 0.0:
        return complex(amp, 0.0)
    return complex(amp * np.exp(1j * np.deg2rad(phase_deg)))


@dataclass(frozen=True)
class SceneConfig:
    """Everything needed to synthesise one block of snapshots.

    ``snr_db`` is the per-antenna SNR of the direct path, so the noise
    variance is ``10**(-snr_db/10)``; ``math.inf`` means noiseless.
    """

    users: tuple[Point, ...]
    gamma: complex = gamma_from_db(-7.0)
    snr_db: float = 20.0
    num_snapshots: int = 128
    wavelength: float = DEFAULT_WAVELENGTH
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(Point(*map(float, u)) for u in self.users))
        object.__setattr__(self, "gamma", complex(self.gamma))
        if not self.wavelength > 0:
            raise ConfigurationError("wavelength must be positive")
        if self.num_snapshots < 1:
            raise ConfigurationError("num_snapshots must be >= 1")
        if abs(self.gamma) > 1.0 + 1e-12:
            raise ConfigurationError("|gamma| must not exceed 1")
        if math.isnan(self.snr_db):
            raise ConfigurationError("snr_db is NaN")

    @property
    def noise_variance(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    @property
    def n_users(self) -> int:
        return len(self.users)

    def digest(self) -> str:
        return digest(
            {
                "users": [list(u) for u in self.users],
                "gamma": self.gamma,
                "snr_db": self.snr_db,
                "num_snapshots": self.num_snapshots,
                "wavelength": self.wavelength,
                "seed": self.seed,
            }
        )


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    data: np.ndarray
    config: SceneConfig | None = field(default=None)

    @property
    def n_total(self) -> int:
        return self.data.shape[0]

    @property
    def num_snapshots(self) -> int:
        return self.data.shape[1]


def _phases(positions: np.ndarray, points: np.ndarray, wavelength: float, strict: bool = True) -> np.ndarray:
    # (M, N) unit phasors for M points and N antennas
    d = np.hypot(
        positions[None, :, 0] - points[:, 0, None],
        positions[None, :, 1] - points[:, 1, None],
    )
    if strict and np.any(d == 0.0):
        raise GeometryError("steering point coincides with an antenna")
    return np.exp(1j * (2.0 * np.pi / wavelength) * d)


def steering_vector(array: AntennaArray, u, wavelength: float) -> np.ndarray:
    """Per-antenna phase response ``exp(j 2 pi d_i / wavelength)`` to a source at ``u``."""
    return _phases(array.positions, np.asarray(u, dtype=float).reshape(1, 2), wavelength)[0]


def stacked_steering_grid(
    db: ChannelDatabase, points, wavelength: float, strict: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Direct and summed-reflection steering for many points at once.

    Returns ``(a0, a1)``, each of shape ``(M, n_total)``.  Rows of ``a0``
    stack the direct receivers of every AP in database order; rows of ``a1``
    stack, per AP, the sum over its mirror receivers.  With ``strict=False``
    a point on top of an antenna gets phase 1 instead of raising; search
    grids use this because wall nodes may coincide with antennas.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    a0_parts, a1_parts = [], []
    for _, receivers in db.aps:
        a0_parts.append(_phases(receivers[0].array.positions, pts, wavelength, strict))
        acc = np.zeros((len(pts), len(receivers[0].array)), dtype=complex)
        for r in receivers[1:]:
            acc += _phases(r.array.positions, pts, wavelength, strict)
        a1_parts.append(acc)
    return np.hstack(a0_parts), np.hstack(a1_parts)


def stacked_steering(db: ChannelDatabase, u, wavelength: float) -> tuple[np.ndarray, np.ndarray]:
    a0, a1 = stacked_steering_grid(db, [u], wavelength)
    return a0[0], a1[0]


def direct_steering_grid(
    arrays: Sequence[AntennaArray], points, wavelength: float, strict: bool = True
) -> np.ndarray:
    """Stacked direct-path steering only; used by the wall-agnostic spectra."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.hstack([_phases(a.positions, pts, wavelength, strict) for a in arrays])


def effective_steering(a0: np.ndarray, a1: np.ndarray, gamma) -> np.ndarray:
    """``a0 + gamma * a1``; ``gamma`` may be a scalar or broadcast per row."""
    a0 = np.asarray(a0)
    a1 = np.asarray(a1)
    if a0.shape != a1.shape:
        raise ValueError(f"shape mismatch: {a0.shape} vs {a1.shape}")
    g = np.asarray(gamma)
    if g.ndim and a0.ndim > 1:
        g = g.reshape(-1, *([1] * (a0.ndim - 1)))
    return a0 + g * a1


def user_steering(db: ChannelDatabase, cfg: SceneConfig) -> np.ndarray:
    """Effective steering of every user as columns, shape ``(n_total, K)``."""
    for u in cfg.users:
        if not db.contains(u):
            raise ConfigurationError(f"user {tuple(u)} lies outside the room")
    if not cfg.users:
        return np.zeros((db.n_total, 0), dtype=complex)
    a0, a1 = stacked_steering_grid(db, cfg.users, cfg.wavelength)
    return effective_steering(a0, a1, cfg.gamma).T


def complex_gaussian(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian samples with ``E|z|^2 = variance``."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_snapshots(
    db: ChannelDatabase, cfg: SceneConfig, rng: np.random.Generator | None = None
) -> SnapshotMatrix:
    """Draw ``r(f) = sum_k abar_k s_k(f) + n(f)`` for ``f = 1..F``.

    Symbols are drawn first (K x F), then noise (n_total x F), from
    ``rng`` or a fresh generator seeded with ``cfg.seed``.
    """
    if not cfg.users:
        raise ConfigurationError("at least one user is required")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    A = user_steering(db, cfg)
    F = cfg.num_snapshots
    s = complex_gaussian(rng, (cfg.n_users, F))
    noise = complex_gaussian(rng, (db.n_total, F), cfg.noise_variance)
    return SnapshotMatrix(A @ s + noise, cfg)


def ideal_covariance(db: ChannelDatabase, cfg: SceneConfig) -> np.ndarray:
    """``sum_k abar_k abar_k^H + sigma^2 I``."""
    A = user_steering(db, cfg)
    R = A @ A.conj().T + cfg.noise_variance * np.eye(db.n_total)
    return 0.5 * (R + R.conj().T)
