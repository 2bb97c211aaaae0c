"""Tab-separated evaluation tables and companion matplotlib figures.

The table is the machine-readable artifact; the figures give the same
numbers at a glance (per-clip bars plus per-frame curves when per-frame
series exist).  Figures are rendered headless to PNG next to the table.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

# column order of the summary table; absent metrics are simply skipped
METRIC_ORDER = ("rm", "ssim", "psnr", "vepi", "texture_loss")


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.6f}"
    return str(value)


def write_table(path, rows: list, metrics: list) -> Path:
    """Write one row per clip plus a mean row; returns the table path.

    ``rows`` maps clip ids to metric dicts: [(clip_id, {metric: value})].
    """
    path = Path(path)
    columns = [m for m in METRIC_ORDER if m in metrics]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\t".join(["clip"] + list(columns)) + "\n")
        for clip_id, values in rows:
            fh.write("\t".join([str(clip_id)] + [_format(values.get(c)) for c in columns]) + "\n")
        if len(rows) > 1:
            fh.write("\t".join(["mean"] + [_format(_mean_of(rows, c)) for c in columns]) + "\n")
    return path


def _mean_of(rows, column):
    values = [v.get(column) for _, v in rows if v.get(column) is not None]
    if not values:
        return None
    if any(isinstance(v, float) and math.isinf(v) for v in values):
        return math.inf
    return sum(values) / len(values)


def _finite(values):
    return [v for v in values if v is not None and not (isinstance(v, float) and math.isinf(v))]


def render_report_figures(directory, rows: list, metrics: list, per_frame: dict = None) -> list:
    """Render one bar chart per metric and optional per-frame curves.

    ``per_frame`` maps metric name -> {clip_id: [value per frame]}.
    Returns the list of written figure paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    columns = [m for m in METRIC_ORDER if m in metrics]
    labels = [str(cid) for cid, _ in rows]
    for metric in columns:
        values = [v.get(metric) for _, v in rows]
        finite = _finite(values)
        fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(rows) + 2.0), 3.2))
        heights = [
            v if v is not None and not (isinstance(v, float) and math.isinf(v)) else 0.0
            for v in values
        ]
        bars = ax.bar(range(len(rows)), heights, color="#4878a8")
        for bar, v in zip(bars, values):
            if v is not None and isinstance(v, float) and math.isinf(v):
                ax.annotate("inf", (bar.get_x() + bar.get_width() / 2, 0), ha="center", va="bottom")
        if finite:
            ax.axhline(sum(finite) / len(finite), color="#a84848", linewidth=1, label="mean")
            ax.legend(loc="best", fontsize=8)
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
        ax.set_ylabel(metric)
        ax.set_title(f"{metric} per clip")
        fig.tight_layout()
        out = directory / f"report_{metric}.png"
        fig.savefig(out, dpi=110)
        plt.close(fig)
        written.append(out)
    if per_frame:
        for metric, series in per_frame.items():
            if metric not in columns or not series:
                continue
            fig, ax = plt.subplots(figsize=(6.0, 3.2))
            for clip_id, values in series.items():
                vals = [v if not (isinstance(v, float) and math.isinf(v)) else float("nan") for v in values]
                ax.plot(vals, label=str(clip_id), linewidth=1)
            ax.set_xlabel("frame")
            ax.set_ylabel(metric)
            ax.set_title(f"{metric} per frame")
            if len(series) <= 12:
                ax.legend(fontsize=7)
            fig.tight_layout()
            out = directory / f"report_{metric}_per_frame.png"
            fig.savefig(out, dpi=110)
            plt.close(fig)
            written.append(out)
    return written
