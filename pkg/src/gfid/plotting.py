"""SVG charts of experiment results.

matplotlib is imported lazily so that the library and the CSV runner work
without it.  Install the ``plot`` extra to use this module.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import IoError
from .experiments import summarize

__all__ = ["plot_results", "line_chart", "xi_histogram"]


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise ImportError("plotting needs matplotlib (pip install 'gfid[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _as_list(value):
    if value is None:
        return []
    return [value] if isinstance(value, str) else list(value)


def _save(fig, path):
    plt = _pyplot()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


def line_chart(stats, cell_keys, x, y, path, series=None, logx=False, logy=False, title=""):
    """One line per ``series`` combination of ``y`` against grid key ``x``.

    ``stats`` is the mapping returned by :func:`gfid.experiments.summarize`.
    """
    plt = _pyplot()
    keys = list(cell_keys)
    xi = keys.index(x)
    si = [keys.index(s) for s in _as_list(series)]
    lines = {}
    for cell, agg in stats.items():
        label = ", ".join(f"{keys[i]}={cell[i]}" for i in si) or y
        lines.setdefault(label, []).append((float(cell[xi]), agg[y]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in lines.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(y.replace("_", " "))
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def xi_histogram(rows, cell_keys, path, series=None, xmax=5.0, bins=50, title=""):
    """Stacked histograms of the certificate ``xi`` split by success, one panel per series value.

    Vertical lines mark the median ``xi`` over successes, failures and all trials.
    """
    plt = _pyplot()
    keys = list(cell_keys)
    si = [keys.index(s) for s in _as_list(series)]
    panels = {}
    for r in rows:
        label = ", ".join(r.cell[i] for i in si) or "all"
        panels.setdefault(label, []).append((r.diag, r.success))
    fig, axes = plt.subplots(len(panels), 1, figsize=(6, 2.2 * len(panels)), squeeze=False)
    edges = np.linspace(0.0, xmax, bins + 1)
    for ax, (label, vals) in zip(axes[:, 0], panels.items()):
        xi = np.array([v for v, _ in vals], dtype=float)
        ok = np.array([s for _, s in vals], dtype=bool)
        keep = np.isfinite(xi)
        ax.hist([xi[keep & ok], xi[keep & ~ok]], bins=edges, stacked=True,
                label=["success", "failure"], color=["tab:blue", "tab:orange"])
        for sel, color in ((keep & ok, "tab:blue"), (keep & ~ok, "tab:orange"), (keep, "tab:green")):
            if sel.any():
                ax.axvline(float(np.median(xi[sel])), color=color, ls="--", lw=1)
        ax.axvline(1.0, color="k", lw=0.8)
        ax.set_title(f"{label}: success ratio {ok.mean():.2f}", fontsize=9)
        ax.set_xlim(0, xmax)
        ax.legend(fontsize=7)
    axes[-1, 0].set_xlabel("xi")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def plot_results(config, rows, path):
    """Draw the chart described by ``config.plot`` for ``rows``; return ``path`` or None."""
    spec = config.plot
    if not spec:
        return None
    rows = list(rows)
    kind = spec.get("kind", "line")
    if kind == "xi_histogram":
        xi_histogram(rows, config.cell_keys, path, series=spec.get("series"),
                     xmax=spec.get("xmax", 5.0), title=config.name)
    else:
        stats = summarize(rows)
        stats = {k: v for k, v in stats.items() if not math.isnan(v[spec.get("y", "rate")])}
        line_chart(stats, config.cell_keys, spec["x"], spec.get("y", "rate"), path,
                   series=spec.get("series"), logx=spec.get("logx", False),
                   logy=spec.get("logy", False), title=config.name)
    return path
