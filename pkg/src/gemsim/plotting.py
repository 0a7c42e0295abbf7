"""Static SVG figures rendered from the CSVs the scenarios write."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core.io import read_csv  # noqa: E402

# required columns per plot kind
SCHEMAS = {
    "similarity": ("frame_index", "t", "S_N", "S_T", "D"),
    "contrast": ("a", "t", "C", "C_pred"),
    "mtf": ("f_lp_per_mm", "t", "C", "C_model"),
    "echo": ("t_seconds", "intensity"),
}
KINDS = tuple(SCHEMAS)

# svg output carries a date stamp unless told otherwise
matplotlib.rcParams["svg.hashsalt"] = "gemsim"
_SVG_META = {"Date": None, "Creator": None}


class PlotError(ValueError):
    pass


def load(path: str | Path, kind: str) -> dict[str, np.ndarray]:
    """Read ``path`` and check it carries the columns ``kind`` needs."""
    if kind not in SCHEMAS:
        raise PlotError(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    header, rows = read_csv(path)
    missing = [c for c in SCHEMAS[kind] if c not in header]
    if not header:
        raise PlotError(f"{path}: no data")
    if missing:
        raise PlotError(f"{path}: not a {kind} table, missing column(s) {', '.join(missing)}")
    if not rows:
        raise PlotError(f"{path}: no data")
    cols = {}
    for c in header:
        try:
            cols[c] = np.array([float(r[c]) for r in rows])
        except ValueError:
            cols[c] = np.array([r[c] for r in rows])
    return cols


def _finish(fig, out: Path) -> Path:
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return out


def plot_similarity(cols, out: Path, threshold: float = 0.15) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    n = cols["frame_index"]
    ax.plot(n, cols["S_N"], "o-", ms=3, label="S_N")
    ax.plot(n, cols["S_T"], "s-", ms=3, label="S_T")
    low = np.nonzero(cols["D"] < threshold)[0]
    if low.size:
        k = low[np.argmin(cols["D"][low])]
        ax.axvline(n[k], color="0.5", ls="--", lw=1)
        ax.annotate(f"D = {cols['D'][k]:.2f}", (n[k], max(cols["S_N"][k], cols["S_T"][k])),
                    xytext=(6, 6), textcoords="offset points", fontsize=8)
    ax.set_xlabel("frame")
    ax.set_ylabel("similarity")
    ax.set_ylim(0, 1.05)
    ax.legend()
    return _finish(fig, out)


def _groups(cols, key):
    order = []
    idx = defaultdict(list)
    for i, v in enumerate(cols[key]):
        if v not in idx:
            order.append(v)
        idx[v].append(i)
    return [(v, np.array(idx[v])) for v in order]


def plot_contrast(cols, out: Path) -> Path:
    """Measured contrast as points, the fixed-parameter model as a line, one color per curve."""
    fig, ax = plt.subplots(figsize=(6, 4))
    key = "a"
    label_of = lambda v: f"a = {v * 1e6:.0f} µm"  # noqa: E731
    if "input_peak" in cols:
        cols = dict(cols)
        cols["_curve"] = np.array([f"{o} {p * 1e6:+.1f} µs" for o, p in zip(cols["orientation"], cols["input_peak"])])
        key, label_of = "_curve", str
    for j, (v, idx) in enumerate(_groups(cols, key)):
        color = f"C{j}"
        t = cols["t"][idx] * 1e6
        ax.plot(t, cols["C"][idx], "o", ms=3, color=color, label=label_of(v))
        ax.plot(t, cols["C_pred"][idx], "-", lw=1, color=color)
    ax.axhline(0, color="0.7", lw=0.8)
    ax.set_xlabel("storage time (µs)")
    ax.set_ylabel("contrast")
    ax.legend(fontsize=8)
    return _finish(fig, out)


def plot_mtf(cols, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for j, (t, idx) in enumerate(_groups(cols, "t")):
        order = idx[np.argsort(cols["f_lp_per_mm"][idx])]
        f = cols["f_lp_per_mm"][order]
        ax.plot(f, cols["C"][order], "o", color=f"C{j}", label=f"t = {t * 1e6:g} µs")
        ax.plot(f, cols["C_model"][order], "-", lw=1, color=f"C{j}")
    ax.set_xlabel("spatial frequency (lp/mm)")
    ax.set_ylabel("contrast")
    ax.legend(fontsize=8)
    return _finish(fig, out)


def plot_echo(cols, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(cols["t_seconds"] * 1e6, cols["intensity"], lw=1)
    ax.set_xlabel("time (µs)")
    ax.set_ylabel("output intensity")
    return _finish(fig, out)


_PLOTTERS = {"similarity": plot_similarity, "contrast": plot_contrast, "mtf": plot_mtf, "echo": plot_echo}


def render(csv_path: str | Path, kind: str, out: str | Path | None = None) -> Path:
    """Render ``csv_path`` as ``kind``; writes next to the CSV unless ``out`` is given."""
    csv_path = Path(csv_path)
    cols = load(csv_path, kind)
    out = Path(out) if out is not None else csv_path.with_suffix(".svg")
    return _PLOTTERS[kind](cols, out)
