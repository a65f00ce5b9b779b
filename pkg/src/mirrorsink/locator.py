"""Peak extraction and estimate-to-truth association."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter

from .errors import ConfigurationError
from .geometry import Point
from .spectra import MethodSpec, SpectrumGrid

log = logging.getLogger(__name__)

_NEIGHBOURS = np.ones((3, 3), dtype=bool)
_NEIGHBOURS[1, 1] = False


@dataclass(frozen=True)
class LocationEstimate:
    positions: tuple[Point, ...]
    peak_values: tuple[float, ...]
    method: MethodSpec | None = None
    indices: tuple[int, ...] = ()
    fallback: bool = False

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class ErrorReport:
    per_user_error: tuple[float, ...]
    rmse: float
    assignment: tuple[int, ...]
    cap: float | None = None

    @property
    def squared_errors(self) -> np.ndarray:
        return np.square(self.per_user_error)


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Linear indices of nodes strictly above all of their (up to 8) neighbours."""
    v = np.asarray(values, dtype=float)
    neigh = maximum_filter(v, footprint=_NEIGHBOURS, mode="constant", cval=-np.inf)
    return np.flatnonzero((v > neigh).ravel())


def _strongest(values: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    # descending by value, ties by ascending linear index
    order = np.lexsort((candidates, -values[candidates]))
    return candidates[order]


def pick_peaks(grid: SpectrumGrid, K: int, mode: str = "topk", min_sep: float = 0.0) -> LocationEstimate:
    """The ``K`` strongest nodes, or the ``K`` strongest separated local maxima.

    ``mode="local"`` keeps nodes that strictly exceed their 8-neighbourhood
    and are at least ``min_sep`` metres from every stronger pick.  If fewer
    than ``K`` such peaks exist the result falls back to ``topk`` and sets
    ``fallback``.
    """
    flat = grid.values.ravel()
    if not 1 <= K <= flat.size:
        raise ConfigurationError(f"K must be in [1, {flat.size}], got {K}")
    fallback = False
    if mode == "topk":
        idx = _strongest(flat, np.arange(flat.size))[:K]
    elif mode in ("local", "local_maxima"):
        picked: list[int] = []
        for c in _strongest(flat, local_maxima(grid.values)):
            p = grid.grid.node(c)
            if all(math.dist(p, grid.grid.node(q)) >= min_sep for q in picked):
                picked.append(int(c))
                if len(picked) == K:
                    break
        if len(picked) < K:
            log.warning("only %d local maxima found for K=%d; falling back to topk", len(picked), K)
            fallback = True
            idx = _strongest(flat, np.arange(flat.size))[:K]
        else:
            idx = np.array(picked)
    else:
        raise ConfigurationError(f"unknown peak mode {mode!r}")
    return LocationEstimate(
        positions=tuple(Point(*grid.grid.node(i)) for i in idx),
        peak_values=tuple(float(flat[i]) for i in idx),
        method=grid.method,
        indices=tuple(int(i) for i in idx),
        fallback=fallback,
    )


def match_and_error(
    est: LocationEstimate | Sequence, truth: Sequence, cap: float | None = None
) -> ErrorReport:
    """Assign estimates to true users minimising total squared distance.

    All ``K!`` permutations are tried, which is exact and cheap for the
    small user counts used here.  ``assignment[k]`` is the estimate index
    matched to true user ``k``.  Per-user errors are capped at ``cap``
    before averaging when a cap is given.
    """
    positions = est.positions if isinstance(est, LocationEstimate) else est
    E = np.asarray(positions, dtype=float).reshape(-1, 2)
    T = np.asarray(truth, dtype=float).reshape(-1, 2)
    if len(E) != len(T):
        raise ConfigurationError(f"{len(E)} estimates for {len(T)} true users")
    if len(T) == 0:
        raise ConfigurationError("nothing to match")
    d2 = np.sum((T[:, None, :] - E[None, :, :]) ** 2, axis=-1)
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(len(T))):
        cost = sum(d2[k, perm[k]] for k in range(len(T)))
        if cost < best_cost:
            best, best_cost = perm, cost
    errors = np.sqrt([d2[k, best[k]] for k in range(len(T))])
    if cap is not None:
        errors = np.minimum(errors, cap)
    rmse = float(np.sqrt(np.mean(errors**2)))
    return ErrorReport(tuple(float(e) for e in errors), rmse, tuple(best), cap)
