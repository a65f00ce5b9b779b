"""Matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so repeated runs give identical SVG files
plt.rcParams["svg.hashsalt"] = "mirrorsink"
_SVG_META = {"Date": None, "Creator": "mirrorsink"}

_STYLE = {
    "MUSIC_EST": dict(color="tab:blue", marker="o", ls="-"),
    "MUSIC_KNOWN": dict(color="tab:cyan", marker="x", ls="--"),
    "MVDR": dict(color="tab:red", marker="s", ls="-"),
    "MF": dict(color="tab:green", marker="^", ls="-"),
}

#: Zero RMSE cannot sit on a log axis; such points are drawn at this floor.
RMSE_FLOOR = 1e-3


def _save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".") or "svg"
    fig.savefig(path, format=fmt, bbox_inches="tight", metadata=_SVG_META if fmt == "svg" else None)
    plt.close(fig)
    return path


def plot_sweep(result, path, n_antennas: int | None = None) -> Path:
    """RMSE versus gamma (dB), one line per method and antenna count, log y-axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = sorted({r.n_antennas for r in result.rows}) if n_antennas is None else [n_antennas]
    for n in ns:
        for m in result.methods:
            rows = sorted((r for r in result.rows if r.method == m and r.n_antennas == n), key=lambda r: r.gamma_db)
            if not rows:
                continue
            g = [r.gamma_db for r in rows]
            y = np.maximum([r.rmse_m for r in rows], RMSE_FLOOR)
            lo = np.maximum([r.ci95_lo_m for r in rows], RMSE_FLOOR)
            hi = np.maximum([r.ci95_hi_m for r in rows], RMSE_FLOOR)
            label = m if len(ns) == 1 else f"{m} N={n}"
            style = _STYLE.get(m, {})
            ax.plot(g, y, label=label, **style)
            ax.fill_between(g, lo, hi, color=style.get("color"), alpha=0.15, lw=0)
    ax.set_yscale("log")
    ax.set_xlabel("reflection coefficient (dB)")
    ax.set_ylabel(f"RMS location error (m), zero shown at {RMSE_FLOOR:g}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_spectrum(spectrum, path, truth=None, estimates=None, title: str | None = None) -> Path:
    """Heatmap of a spectrum in dB with 'o' at true users and '+' at estimates."""
    g = spectrum.grid
    v = np.asarray(spectrum.values, dtype=float)
    vdb = 10 * np.log10(np.maximum(v, np.finfo(float).tiny) / max(v.max(), np.finfo(float).tiny))
    fig, ax = plt.subplots(figsize=(5, 6.5))
    extent = (g.x0 - g.dx / 2, g.x0 + (g.nx - 0.5) * g.dx, g.y0 - g.dy / 2, g.y0 + (g.ny - 0.5) * g.dy)
    im = ax.imshow(np.clip(vdb, -60, 0), origin="lower", extent=extent, cmap="viridis", aspect="equal")
    fig.colorbar(im, ax=ax, label="dB re. peak")
    if truth:
        t = np.asarray(truth, dtype=float)
        ax.plot(t[:, 0], t[:, 1], "o", mfc="none", mec="white", ms=9, label="true")
    if estimates:
        e = np.asarray(estimates, dtype=float)
        ax.plot(e[:, 0], e[:, 1], "+", color="red", ms=11, mew=2, label="estimate")
    if truth or estimates:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(title or spectrum.method.label)
    return _save(fig, path)
