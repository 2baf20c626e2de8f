"""Deterministic SVG figures for experiment tables."""

from __future__ import annotations

import math
import warnings

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

KINDS = ("convergence", "loglog", "weights-trace")

_DEFAULT_COLUMNS = {
    "convergence": ("iteration", "distance", None),
    "loglog": ("N", "mean_distance", "stderr"),
    "weights-trace": ("rank", "weight", None),
}


def _column(table, name):
    return [float(row[name]) for row in table]


def plot_emit(table, kind, path, x=None, y=None, yerr=None, title=None,
              logy=None, reference_slope=None):
    """Render ``table`` (a list of row dicts) to an SVG file at ``path``.

    ``convergence`` draws a line with markers (log ``y`` by default),
    ``loglog`` draws points with error bars on log-log axes and an optional
    ``N^slope`` guide anchored at the first point, ``weights-trace`` draws a
    step trace on a log ``y`` axis.  An empty table emits a warning and
    writes nothing.  Returns the path written, or ``None``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    if not table:
        warnings.warn(f"empty table: no {kind} plot written to {path}", stacklevel=2)
        return None
    dx, dy, de = _DEFAULT_COLUMNS[kind]
    x, y = x or dx, y or dy
    yerr = yerr if yerr is not None else (de if de in table[0] else None)
    xs, ys = _column(table, x), _column(table, y)
    fig = Figure(figsize=(6.0, 4.0), dpi=100)
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)
    positive = all(v > 0 for v in ys)
    if kind == "convergence":
        ax.plot(xs, ys, marker="o", linewidth=1.2)
        if (logy if logy is not None else positive) and positive:
            ax.set_yscale("log")
    elif kind == "loglog":
        errs = _column(table, yerr) if yerr else None
        if errs is not None:
            errs = [0.0 if math.isnan(e) else e for e in errs]
        ax.errorbar(xs, ys, yerr=errs, marker="o", linestyle="-", capsize=3)
        if reference_slope is not None and len(xs) > 1:
            guide = [ys[0] * (v / xs[0]) ** reference_slope for v in xs]
            ax.plot(xs, guide, linestyle="--", color="gray",
                    label=f"slope {reference_slope:g}")
            ax.legend(loc="best")
        if all(v > 0 for v in xs):
            ax.set_xscale("log")
        if positive:
            ax.set_yscale("log")
    else:
        ax.step(xs, ys, where="mid")
        if positive:
            ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "singdiff", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path
