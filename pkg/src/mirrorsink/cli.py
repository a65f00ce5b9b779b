"""``mirrorsink`` command line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, NumericalError
from .geometry import Point
from .io import (
    DEFAULT_WAVELENGTH,
    load_db,
    load_document,
    load_scene,
    read_snapshots,
    save_db,
    write_snapshots,
)
from .locator import pick_peaks
from .signal_model import SceneConfig, gamma_from_db, synthesize_snapshots
from .spectra import GridSpec, Method, MethodSpec, SpectrumGrid, compute_spectrum
from .subspace import eigh_ascending, mvdr_inverse, noise_projector, sample_covariance

log = logging.getLogger("mirrorsink")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parse_gamma(doc: dict) -> complex:
    if "gamma" in doc:
        g = doc["gamma"]
        return complex(*g) if isinstance(g, (list, tuple)) else complex(g)
    return gamma_from_db(float(doc.get("gamma_db", -7.0)), float(doc.get("gamma_phase_deg", 180.0)))


def cmd_build_db(args) -> int:
    db, wavelength = load_scene(args.scene)
    save_db(db, args.out, wavelength)
    log.info("wrote %s: %d APs, L=%d, %d antennas", args.out, len(db.aps), db.L, db.n_total)
    return EXIT_OK


def cmd_synth(args) -> int:
    db, db_wavelength = load_db(args.db)
    doc = load_document(args.config)
    users = doc.get("users")
    if not users:
        raise ConfigurationError("synth config must list 'users'")
    cfg = SceneConfig(
        users=tuple(Point(*u) for u in users),
        gamma=_parse_gamma(doc),
        snr_db=float(doc.get("snr_db", 20.0)),
        num_snapshots=int(doc.get("snapshots", 128)),
        wavelength=float(doc.get("wavelength", db_wavelength or DEFAULT_WAVELENGTH)),
        seed=int(doc.get("seed", 0)),
    )
    snaps = synthesize_snapshots(db, cfg)
    header = {
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "wavelength": cfg.wavelength,
        "n_users": cfg.n_users,
        "users": [list(u) for u in cfg.users],
        "gamma": [cfg.gamma.real, cfg.gamma.imag],
        "snr_db": cfg.snr_db,
    }
    write_snapshots(args.out, snaps.data, header)
    log.info("wrote %s: %d x %d", args.out, *snaps.data.shape)
    return EXIT_OK


def _method_spec(args, header) -> MethodSpec:
    kind = Method(args.method)
    if kind is Method.MUSIC_KNOWN:
        if args.gamma_db is not None:
            gamma = gamma_from_db(args.gamma_db, args.gamma_phase)
        elif "gamma" in header:
            gamma = complex(*header["gamma"])
        else:
            raise ConfigurationError("music-known needs --gamma-db")
        return MethodSpec.music_known(gamma)
    if kind is Method.MUSIC_EST:
        return MethodSpec(kind, gamma_mode=args.gamma_mode, clamp=not args.no_clamp)
    return MethodSpec(kind)


def _spectrum_from_files(args) -> tuple[SpectrumGrid, dict, int]:
    db, db_wavelength = load_db(args.db)
    data, header = read_snapshots(args.snapshots)
    if data.shape[0] != db.n_total:
        raise ConfigurationError(f"snapshots have {data.shape[0]} rows, database has {db.n_total} antennas")
    wavelength = float(header.get("wavelength") or db_wavelength or DEFAULT_WAVELENGTH)
    k = args.k if args.k is not None else int(header.get("n_users", 1))
    spec = _method_spec(args, header)
    R = sample_covariance(data)
    grid = GridSpec.covering(db.bounds(), args.spacing)
    projector = inverse = None
    if spec.kind.uses_database:
        projector = noise_projector(R, k)
    elif spec.kind is Method.MVDR:
        inverse, eps = mvdr_inverse(R)
        if eps:
            log.info("diagonal loading %.3g applied", eps)
    if getattr(args, "dump_eigen", None):
        w, _ = eigh_ascending(R)
        with open(args.dump_eigen, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["index", "eigenvalue"])
            for i, v in enumerate(w):
                wr.writerow([i, repr(float(v))])
    spectrum = compute_spectrum(spec, db, grid, wavelength, projector=projector, covariance=R, inverse=inverse)
    return spectrum, header, k


def write_spectrum_csv(spectrum: SpectrumGrid, path) -> Path:
    pts = spectrum.grid.points()
    vals = spectrum.values.ravel()
    gmap = None if spectrum.gamma_map is None else spectrum.gamma_map.ravel()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value"] + (["gamma_hat"] if gmap is not None else []))
        for i, (x, y) in enumerate(pts):
            row = [repr(float(x)), repr(float(y)), repr(float(vals[i]))]
            if gmap is not None:
                g = gmap[i]
                row.append(repr(float(g)) if np.isrealobj(gmap) else repr(complex(g)))
            w.writerow(row)
    return Path(path)


def cmd_spectrum(args) -> int:
    spectrum, header, k = _spectrum_from_files(args)
    write_spectrum_csv(spectrum, args.out)
    if args.svg:
        from .plotting import plot_spectrum

        est = pick_peaks(spectrum, k, "local")
        plot_spectrum(spectrum, args.svg, truth=header.get("users"), estimates=est.positions)
    log.info("wrote %s (%d x %d nodes)", args.out, spectrum.nx, spectrum.ny)
    return EXIT_OK


def cmd_locate(args) -> int:
    spectrum, header, k = _spectrum_from_files(args)
    est = pick_peaks(spectrum, k, args.peaks, args.min_sep)
    am = spectrum.argmax()
    doc = {
        "method": spectrum.method.label,
        "k": k,
        "peaks": args.peaks,
        "estimates": [list(p) for p in est.positions],
        "peak_values": list(est.peak_values),
        "fallback_to_topk": est.fallback,
        "argmax": {"index": am, "position": list(spectrum.grid.node(am)), "value": float(spectrum.values.ravel()[am])},
        "grid": {"x0": spectrum.x0, "y0": spectrum.y0, "dx": spectrum.dx, "dy": spectrum.dy, "nx": spectrum.nx, "ny": spectrum.ny},
        "snapshots": {"seed": header.get("seed"), "config_digest": header.get("config_digest")},
    }
    if spectrum.gamma_map is not None:
        doc["gamma_hat"] = [
            float(np.real(spectrum.gamma_map.ravel()[i])) for i in est.indices
        ]
    text = json.dumps(doc, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def _sweep_config(args):
    from .harness import SweepConfig

    cfg = SweepConfig.load(args.config) if args.config else SweepConfig.default()
    return cfg.ci_preset() if getattr(args, "ci_preset", False) else cfg


def cmd_sweep(args) -> int:
    from .harness import emit_outputs, sweep

    cfg = _sweep_config(args)

    def progress(done, total):
        if done == total or done % max(1, total // 20) == 0:
            log.info("%d/%d trials", done, total)

    result = sweep(cfg, threads=args.threads, progress=progress)
    paths = emit_outputs(result, args.out_dir, svg=not args.no_svg)
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_scenario(args) -> int:
    from .harness import run_scenario
    from .plotting import plot_spectrum

    cfg = _sweep_config(args)
    n = args.n_antennas or cfg.n_antennas[0]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outcome = run_scenario(cfg, args.gamma_db, n)
    summary = {}
    for label, spectrum in outcome.spectra.items():
        stem = f"{label.lower()}_N{n}_{args.gamma_db:g}dB"
        write_spectrum_csv(spectrum, out / f"{stem}.csv")
        est = outcome.estimates[label]
        plot_spectrum(spectrum, out / f"{stem}.svg", truth=outcome.users, estimates=est.positions,
                      title=f"{label}, N={n}, gamma={args.gamma_db:g} dB")
        summary[label] = {"estimates": [list(p) for p in est.positions], "rmse_m": outcome.errors[label].rmse}
    doc = {"users": [list(u) for u in outcome.users], "gamma_db": args.gamma_db, "n_antennas": n, "methods": summary}
    (out / "scenario.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def _add_spectrum_args(p):
    p.add_argument("--method", required=True, choices=[m.value for m in Method])
    p.add_argument("--db", required=True)
    p.add_argument("--snapshots", required=True)
    p.add_argument("--gamma-db", type=float, default=None, help="known gamma for music-known")
    p.add_argument("--gamma-phase", type=float, default=180.0, help="phase of known gamma in degrees")
    p.add_argument("--gamma-mode", choices=["real", "complex"], default="real")
    p.add_argument("--no-clamp", action="store_true", help="do not clamp estimated gamma to |gamma| <= 1")
    p.add_argument("--k", type=int, default=None, help="number of users (default: from snapshot header)")
    p.add_argument("--spacing", type=float, default=0.1, help="search grid spacing in metres")
    p.add_argument("--dump-eigen", metavar="CSV", help="write covariance eigenvalues to CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mirrorsink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-db", help="build the virtual-receiver database from a scene file")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_db)

    p = sub.add_parser("synth", help="synthesise snapshots for configured users")
    p.add_argument("--db", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spectrum", help="evaluate a spatial spectrum on the room grid")
    _add_spectrum_args(p)
    p.add_argument("--out", required=True, help="CSV with x,y,value[,gamma_hat]")
    p.add_argument("--svg", help="also write a heatmap")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("locate", help="estimate user positions")
    _add_spectrum_args(p)
    p.add_argument("--peaks", choices=["topk", "local"], default="topk")
    p.add_argument("--min-sep", type=float, default=0.0)
    p.add_argument("--out", help="JSON result (default: stdout)")
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("sweep", help="Monte Carlo RMSE versus reflection coefficient")
    p.add_argument("--config", help="sweep YAML (default: bundled 20x30 m scenario)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--ci-preset", action="store_true", help="0.5 m grid and 25 trials")
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scenario", help="spectra and estimates for one fixed configuration")
    p.add_argument("--config", help="sweep YAML; fixed 'users' are honoured")
    p.add_argument("--gamma-db", type=float, default=-7.0)
    p.add_argument("--n-antennas", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ci-preset", action="store_true")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"mirrorsink: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"mirrorsink: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
