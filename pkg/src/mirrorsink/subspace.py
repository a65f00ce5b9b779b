"""Covariance estimation, eigendecomposition and the noise-subspace projector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericalError

#: Relative diagonal loading used when a covariance must be regularised.
DEFAULT_LOADING = 1e-6


@dataclass(frozen=True, eq=False)
class Covariance:
    matrix: np.ndarray
    source: str = "sample"
    snapshots: int | None = None

    def __post_init__(self):
        R = np.asarray(self.matrix, dtype=complex)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("covariance must be square")
        object.__setattr__(self, "matrix", R)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def scaled(self, c: float) -> "Covariance":
        return Covariance(c * self.matrix, self.source, self.snapshots)


@dataclass(frozen=True, eq=False)
class NoiseProjector:
    """``W = E_N E_N^H`` together with the basis and the full ascending spectrum."""

    matrix: np.ndarray
    signal_dim: int
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def energy(self, vectors: np.ndarray) -> np.ndarray:
        """``v^H W v`` for each row of ``vectors``; exact zero floor, never negative."""
        proj = np.asarray(vectors) @ self.basis.conj()
        return np.sum(proj.real**2 + proj.imag**2, axis=-1)


def sample_covariance(snapshots) -> Covariance:
    """``(1/F) sum_f r(f) r(f)^H`` over the columns of the snapshot matrix."""
    data = getattr(snapshots, "data", snapshots)
    X = np.asarray(data, dtype=complex)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ConfigurationError("empty snapshot set")
    F = X.shape[1]
    R = (X @ X.conj().T) / F
    return Covariance(0.5 * (R + R.conj().T), "sample", F)


def ideal(matrix: np.ndarray) -> Covariance:
    return Covariance(matrix, "ideal", None)


def eigh_ascending(R: Covariance | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    M = getattr(R, "matrix", R)
    M = 0.5 * (M + M.conj().T)
    return np.linalg.eigh(M)


def noise_projector(R: Covariance | np.ndarray, signal_dim: int) -> NoiseProjector:
    """Projector onto the eigenvectors of the ``n - signal_dim`` smallest eigenvalues."""
    M = getattr(R, "matrix", R)
    n = M.shape[0]
    if not 1 <= signal_dim < n:
        raise ConfigurationError(f"signal dimension must be in [1, {n - 1}], got {signal_dim}")
    w, V = eigh_ascending(M)
    if not np.all(np.isfinite(w)):
        raise NumericalError("eigendecomposition produced non-finite values")
    E = V[:, : n - signal_dim]
    W = E @ E.conj().T
    return NoiseProjector(0.5 * (W + W.conj().T), signal_dim, E, w)


def regularized_inverse(R: Covariance | np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Inverse of ``R + eps I`` via Cholesky; raises NumericalError if not positive definite."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    M = np.asarray(getattr(R, "matrix", R), dtype=complex)
    M = 0.5 * (M + M.conj().T) + eps * np.eye(M.shape[0])
    try:
        c = scipy.linalg.cho_factor(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is singular; use eps > 0") from exc
    inv = scipy.linalg.cho_solve(c, np.eye(M.shape[0], dtype=complex))
    if not np.all(np.isfinite(inv)):
        raise NumericalError("inverse is not finite")
    return 0.5 * (inv + inv.conj().T)


def default_loading(R: Covariance | np.ndarray, rel: float = DEFAULT_LOADING) -> float:
    M = getattr(R, "matrix", R)
    return rel * float(np.trace(M).real) / M.shape[0]


def mvdr_inverse(R: Covariance, rel_loading: float = DEFAULT_LOADING) -> tuple[np.ndarray, float]:
    """Inverse used by MVDR; loads the diagonal only if ``F < n`` or inversion fails.

    Returns the inverse and the loading that was applied.
    """
    if R.snapshots is not None and R.snapshots < R.size:
        eps = default_loading(R, rel_loading)
        return regularized_inverse(R, eps), eps
    try:
        return regularized_inverse(R, 0.0), 0.0
    except NumericalError:
        eps = default_loading(R, rel_loading)
        return regularized_inverse(R, eps), eps
