"""Matplotlib figures written next to the CSV reports."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import ReportRow  # noqa: E402

DIVERGENT_SLOPE = 1e-2

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.fonttype": "path",  # self-contained SVG, no font files referenced
    "svg.hashsalt": "affinity-sim",  # stable element ids
}

MARKERS = {"GBPandas": "o", "BlindGBPandas": "o", "MaxWeight": "s", "BlindMaxWeight": "s",
           "CMuRule": "D", "BlindCMuRule": "D", "FCFS": "v"}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def completion_time_figure(rows: Sequence[ReportRow], path: str | Path,
                           divergent_slope: float = DIVERGENT_SLOPE) -> Path:
    """Mean completion time against total arrival rate, one series per policy.

    Points whose mean backlog slope exceeds ``divergent_slope`` are drawn as
    hollow triangles pinned to the top of the axis instead of at their value.
    """
    if not rows:
        raise ValueError("no rows to plot")
    groups: dict[str, dict[float, list[ReportRow]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[r.policy][r.lam].append(r)

    stable_vals = [np.mean([r.mean_completion_time for r in rs])
                   for by_lam in groups.values() for rs in by_lam.values()
                   if np.mean([r.backlog_slope for r in rs]) <= divergent_slope]
    finite = [v for v in stable_vals if np.isfinite(v)]
    cap = 1.25 * max(finite) if finite else 1.0

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for k, (policy, by_lam) in enumerate(groups.items()):
            lams = sorted(by_lam)
            xs, ys, errs, cx = [], [], [], []
            for lam in lams:
                rs = by_lam[lam]
                ct = np.array([r.mean_completion_time for r in rs])
                if np.mean([r.backlog_slope for r in rs]) > divergent_slope or not np.all(np.isfinite(ct)):
                    cx.append(lam)
                    continue
                xs.append(lam)
                ys.append(ct.mean())
                errs.append(2 * ct.std(ddof=1) if ct.size > 1 else 0.0)
            marker = MARKERS.get(policy, "o")
            line = ax.errorbar(xs, ys, yerr=errs, marker=marker, ms=4, capsize=2, label=policy)
            if cx:
                # staggered so overlapping policies stay visible
                ax.plot(cx, [cap * (1 - 0.04 * k)] * len(cx), linestyle="none", marker="^", ms=7, mfc="none",
                        color=line[0].get_color())
        ax.set_ylim(0, cap * 1.05)
        ax.set_xlabel("total arrival rate (tasks/slot)")
        ax.set_ylabel("mean task completion time (slots)")
        ax.legend(title="policy (open triangles: diverging)")
        fig.tight_layout()
        return _save(fig, path)


def backlog_figure(series: dict[str, tuple[Sequence[int], Sequence[int]]], path: str | Path,
                   title: str = "") -> Path:
    """Tasks in system over time, one line per labelled run."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, (ts, ys) in series.items():
            ax.plot(ts, ys, label=label, lw=1)
        ax.set_xlabel("slot")
        ax.set_ylabel("tasks in system")
        ax.set_yscale("symlog", linthresh=10)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)
