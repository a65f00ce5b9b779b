"""Monte Carlo driver: fixed-scenario spectra and RMSE-versus-gamma sweeps."""

from __future__ import annotations

import csv
import json
import logging
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .errors import ConfigurationError
from .geometry import ChannelDatabase, Point, build_database, rectangle_room, wall_ula
from .io import DEFAULT_WAVELENGTH, digest, load_document
from .locator import ErrorReport, LocationEstimate, match_and_error, pick_peaks
from .signal_model import SceneConfig, gamma_from_db, ideal_covariance, synthesize_snapshots
from .spectra import GridSpec, Method, MethodSpec, SpectrumGrid, SteeringCache, compute_spectrum
from .subspace import Covariance, mvdr_inverse, noise_projector, sample_covariance

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "method",
    "gamma_db",
    "n_antennas",
    "n_aps",
    "snapshots",
    "trials",
    "rmse_m",
    "ci95_lo_m",
    "ci95_hi_m",
    "seed",
)
DEFAULT_GAMMAS = (-30.0, -25.0, -20.0, -15.0, -10.0, -7.0, -5.0, -3.0)
ALL_METHODS = ("music", "music-known", "mvdr", "mf")
BOOTSTRAP_RESAMPLES = 1000

CI_PRESET = {"grid_spacing": 0.5, "trials": 25}


@dataclass(frozen=True)
class SweepConfig:
    """One experiment.  ``snapshots=None`` selects the ideal covariance."""

    room: tuple[float, float, float, float] = (0.0, 0.0, 20.0, 30.0)
    aps: tuple[dict, ...] = ({"id": "ap1", "wall": "bottom"}, {"id": "ap2", "wall": "left"})
    n_antennas: tuple[int, ...] = (6,)
    wavelength: float = DEFAULT_WAVELENGTH
    spacing: float | None = None
    snr_db: float = 20.0
    snapshots: int | None = 128
    n_users: int = 2
    gamma_db: tuple[float, ...] = DEFAULT_GAMMAS
    gamma_phase_deg: float = 180.0
    trials: int = 100
    grid_spacing: float = 0.1
    users: tuple[tuple[float, float], ...] | None = None
    margin: float = 1.0
    seed: int = 2018
    methods: tuple[str, ...] = ALL_METHODS
    peaks: str = "topk"
    min_sep: float = 0.0
    gamma_mode: str = "real"
    clamp: bool = True
    error_cap: float | None = None
    loading: float = 1e-6

    def __post_init__(self):
        for name in ("room", "n_antennas", "gamma_db", "methods"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "aps", tuple(dict(a) for a in self.aps))
        if self.users is not None:
            object.__setattr__(self, "users", tuple(tuple(map(float, u)) for u in self.users))
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not self.gamma_db:
            raise ConfigurationError("gamma_db list is empty")
        if not self.n_antennas or min(self.n_antennas) < 1:
            raise ConfigurationError("n_antennas must list positive counts")
        if self.n_users < 1:
            raise ConfigurationError("n_users must be >= 1")
        if self.users is not None and len(self.users) != self.n_users:
            raise ConfigurationError("fixed user list length must equal n_users")
        if self.snapshots is not None and self.snapshots < 1:
            raise ConfigurationError("snapshots must be >= 1 (or null for ideal)")
        if self.grid_spacing <= 0:
            raise ConfigurationError("grid_spacing must be positive")
        if self.margin < 0:
            raise ConfigurationError("margin must be >= 0")
        if self.peaks not in ("topk", "local"):
            raise ConfigurationError("peaks must be 'topk' or 'local'")
        for m in self.methods:
            Method(m)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known - {"ideal"}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: v for k, v in doc.items() if k in known}
        if doc.get("ideal"):
            kw["snapshots"] = None
        if isinstance(kw.get("n_antennas"), int):
            kw["n_antennas"] = (kw["n_antennas"],)
        if isinstance(kw.get("gamma_db"), (int, float)):
            kw["gamma_db"] = (kw["gamma_db"],)
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"invalid sweep config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SweepConfig":
        return cls.from_dict(load_document(path))

    @classmethod
    def default(cls) -> "SweepConfig":
        text = resources.files("mirrorsink").joinpath("data/default_sweep.yaml").read_text()
        import yaml

        return cls.from_dict(yaml.safe_load(text))

    def ci_preset(self) -> "SweepConfig":
        return replace(self, **CI_PRESET)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        return digest(self.to_dict())

    @property
    def ideal(self) -> bool:
        return self.snapshots is None

    @property
    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.room
        return math.hypot(x1 - x0, y1 - y0)

    def database(self, n_antennas: int) -> ChannelDatabase:
        walls = {w.id: w for w in rectangle_room(*self.room)}
        spacing = self.wavelength / 2 if self.spacing is None else self.spacing
        arrays, ids = [], []
        for i, ap in enumerate(self.aps):
            if ap.get("wall") not in walls:
                raise ConfigurationError(f"AP #{i + 1}: unknown wall {ap.get('wall')!r}")
            arrays.append(wall_ula(walls[ap["wall"]], n_antennas, spacing, ap.get("offset")))
            ids.append(str(ap.get("id", f"ap{i + 1}")))
        return build_database(list(walls.values()), arrays, ids)

    def grid(self) -> GridSpec:
        return GridSpec.covering(self.room, self.grid_spacing)

    def method_specs(self, gamma: complex) -> list[MethodSpec]:
        specs = []
        for m in self.methods:
            kind = Method(m)
            if kind is Method.MUSIC_EST:
                specs.append(MethodSpec(kind, gamma_mode=self.gamma_mode, clamp=self.clamp))
            elif kind is Method.MUSIC_KNOWN:
                specs.append(MethodSpec.music_known(gamma))
            else:
                specs.append(MethodSpec(kind))
        return specs


class TrialContext:
    """Per-antenna-count state shared by all trials: database, grid and steering cache."""

    def __init__(self, cfg: SweepConfig, n_antennas: int):
        self.cfg = cfg
        self.n_antennas = n_antennas
        self.db = cfg.database(n_antennas)
        self.grid = cfg.grid()
        self.cache = SteeringCache(self.db, self.grid, cfg.wavelength)
        pts = self.cache.points
        x0, y0, x1, y1 = cfg.room
        m = cfg.margin
        inner = (pts[:, 0] >= x0 + m) & (pts[:, 0] <= x1 - m) & (pts[:, 1] >= y0 + m) & (pts[:, 1] <= y1 - m)
        if m == 0:
            # users may never sit on a wall (and hence on an antenna)
            inner &= np.array([self.db.contains(p, strict=True) for p in pts])
        self.candidates = np.flatnonzero(inner)
        if cfg.users is None and len(self.candidates) < cfg.n_users:
            raise ConfigurationError("margin leaves fewer grid nodes than users")


@dataclass
class TrialOutcome:
    users: tuple[Point, ...]
    errors: dict[str, ErrorReport]
    estimates: dict[str, LocationEstimate]
    spectra: dict[str, SpectrumGrid] = field(default_factory=dict)


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial_index)]))


def _evaluate(
    ctx: TrialContext,
    users: Sequence[Point],
    gamma: complex,
    rng: np.random.Generator | None,
    keep_spectra: bool = False,
) -> TrialOutcome:
    cfg = ctx.cfg
    scene = SceneConfig(
        users=tuple(users),
        gamma=gamma,
        snr_db=cfg.snr_db,
        num_snapshots=cfg.snapshots or 1,
        wavelength=cfg.wavelength,
    )
    if cfg.ideal:
        R = Covariance(ideal_covariance(ctx.db, scene), "ideal", None)
    else:
        R = sample_covariance(synthesize_snapshots(ctx.db, scene, rng))
    specs = cfg.method_specs(gamma)
    projector = inverse = None
    if any(s.kind.uses_database for s in specs):
        projector = noise_projector(R, cfg.n_users)
    if any(s.kind is Method.MVDR for s in specs):
        inverse, _ = mvdr_inverse(R, cfg.loading)
    cap = cfg.diagonal if cfg.error_cap is None else cfg.error_cap
    outcome = TrialOutcome(tuple(Point(*u) for u in users), {}, {})
    for spec in specs:
        spectrum = compute_spectrum(
            spec,
            ctx.db,
            ctx.grid,
            cfg.wavelength,
            projector=projector,
            covariance=R,
            inverse=inverse,
            cache=ctx.cache,
        )
        est = pick_peaks(spectrum, cfg.n_users, cfg.peaks, cfg.min_sep)
        outcome.estimates[spec.label] = est
        outcome.errors[spec.label] = match_and_error(est, users, cap)
        if keep_spectra:
            outcome.spectra[spec.label] = spectrum
    return outcome


def draw_users(ctx: TrialContext, rng: np.random.Generator) -> tuple[Point, ...]:
    idx = rng.choice(ctx.candidates, size=ctx.cfg.n_users, replace=False)
    return tuple(Point(*ctx.cache.points[i]) for i in idx)


def run_trial(
    cfg: SweepConfig,
    gamma_db: float,
    trial_index: int,
    n_antennas: int | None = None,
    ctx: TrialContext | None = None,
    keep_spectra: bool = False,
) -> TrialOutcome:
    """One Monte Carlo trial: place users, generate data, run every method on it.

    The random stream depends only on ``(cfg.seed, trial_index)``, so the
    same trial index sees the same users and symbols at every gamma.
    """
    n_antennas = cfg.n_antennas[0] if n_antennas is None else n_antennas
    ctx = TrialContext(cfg, n_antennas) if ctx is None else ctx
    rng = trial_rng(cfg.seed, trial_index)
    users = tuple(Point(*u) for u in cfg.users) if cfg.users is not None else draw_users(ctx, rng)
    gamma = gamma_from_db(gamma_db, cfg.gamma_phase_deg)
    return _evaluate(ctx, users, gamma, rng, keep_spectra)


def run_scenario(cfg: SweepConfig, gamma_db: float, n_antennas: int | None = None, trial_index: int = 0) -> TrialOutcome:
    """Fixed-scenario run that keeps every spectrum for plotting."""
    return run_trial(cfg, gamma_db, trial_index, n_antennas, keep_spectra=True)


@dataclass(frozen=True)
class SweepRow:
    method: str
    gamma_db: float
    n_antennas: int
    n_aps: int
    snapshots: int | str
    trials: int
    rmse_m: float
    ci95_lo_m: float
    ci95_hi_m: float
    seed: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    config_digest: str
    seed: int
    version: str = __version__
    trial_mse: dict[tuple[str, float, int], np.ndarray] = field(default_factory=dict, repr=False)

    def row(self, method: str, gamma_db: float, n_antennas: int) -> SweepRow:
        for r in self.rows:
            if r.method == method and r.gamma_db == gamma_db and r.n_antennas == n_antennas:
                return r
        raise KeyError((method, gamma_db, n_antennas))

    def rmse(self, method: str, gamma_db: float, n_antennas: int) -> float:
        return self.row(method, gamma_db, n_antennas).rmse_m

    @property
    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))


def bootstrap_ci(trial_mse: np.ndarray, rng: np.random.Generator, n_resamples: int = BOOTSTRAP_RESAMPLES) -> tuple[float, float]:
    """Percentile bootstrap 95% interval of ``sqrt(mean(trial_mse))`` over trials."""
    data = np.asarray(trial_mse, dtype=float)
    point = float(np.sqrt(data.mean()))
    if len(data) < 2 or np.all(data == data[0]):
        return point, point
    res = stats.bootstrap(
        (data,),
        lambda x, axis: np.sqrt(np.mean(x, axis=axis)),
        n_resamples=n_resamples,
        method="percentile",
        random_state=rng,
        vectorized=True,
    )
    return float(res.confidence_interval.low), float(res.confidence_interval.high)


_WORKER_CTX: dict[tuple[str, int], TrialContext] = {}


def _context(cfg: SweepConfig, n: int) -> TrialContext:
    key = (cfg.digest(), n)
    if key not in _WORKER_CTX:
        _WORKER_CTX.clear()
        _WORKER_CTX[key] = TrialContext(cfg, n)
    return _WORKER_CTX[key]


def _trial_task(args):
    cfg, n, gamma_db, t = args
    out = run_trial(cfg, gamma_db, t, n, _context(cfg, n))
    return {m: float(np.mean(rep.squared_errors)) for m, rep in out.errors.items()}


def sweep(cfg: SweepConfig, threads: int = 1, progress=None) -> SweepResult:
    """Average squared errors over trials for every (N, gamma, method).

    Trials run in ``threads`` worker processes when ``threads > 1``; the
    reduction always walks trials in index order, so the output does not
    depend on the worker count.
    """
    tasks = [(cfg, n, g, t) for n in cfg.n_antennas for g in cfg.gamma_db for t in range(cfg.trials)]
    if threads > 1:
        ctx = multiprocessing.get_context("fork") if "fork" in multiprocessing.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
            results = []
            for i, r in enumerate(pool.map(_trial_task, tasks, chunksize=max(1, cfg.trials // 4))):
                results.append(r)
                if progress:
                    progress(i + 1, len(tasks))
    else:
        results = []
        for i, task in enumerate(tasks):
            results.append(_trial_task(task))
            if progress:
                progress(i + 1, len(tasks))

    labels = [Method(m).label for m in cfg.methods]
    snapshots: int | str = "ideal" if cfg.ideal else int(cfg.snapshots)
    rows, raw = [], {}
    it = iter(results)
    for ni, n in enumerate(cfg.n_antennas):
        for gi, g in enumerate(cfg.gamma_db):
            block = [next(it) for _ in range(cfg.trials)]
            for mi, label in enumerate(labels):
                mse = np.array([b[label] for b in block])
                raw[(label, g, n)] = mse
                rng = np.random.default_rng([cfg.seed, ni, gi, mi])
                lo, hi = bootstrap_ci(mse, rng)
                rows.append(
                    SweepRow(label, float(g), int(n), len(cfg.aps), snapshots, cfg.trials,
                             float(np.sqrt(mse.mean())), lo, hi, cfg.seed)
                )
    return SweepResult(rows, cfg.digest(), cfg.seed, __version__, raw)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in result.rows:
                w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write sweep CSV: {exc.strerror}", str(path)) from exc
    return path


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_outputs(result: SweepResult, out_dir, svg: bool = True, stem: str = "sweep") -> dict[str, Path]:
    """Write ``<stem>.csv``, a provenance ``<stem>.json`` and optionally ``<stem>.svg``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create output directory: {exc.strerror}", str(out)) from exc
    paths = {"csv": write_csv(result, out / f"{stem}.csv")}
    meta = {"config_digest": result.config_digest, "seed": result.seed, "version": result.version}
    paths["json"] = out / f"{stem}.json"
    paths["json"].write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if svg and result.rows:
        from .plotting import plot_sweep

        paths["svg"] = plot_sweep(result, out / f"{stem}.svg")
    return paths
