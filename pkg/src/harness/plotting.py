"""
SVG learning curves: mean life-cycle reward per life-cycle index with a
shaded standard-error band, one line per agent.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.core.errors import ValidationError  # noqa: E402
from src.harness.csvio import RunRecord, read_many  # noqa: E402
from src.harness.metrics import MetricsTable, compute_metrics  # noqa: E402


logger = logging.getLogger(__name__)

SVG_STYLE = {
    "svg.hashsalt": "deep-exploration",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
}


def plot_table(table: MetricsTable, out_path: Path | str, title: str = "") -> Path:
    """Write the learning curves of every agent in the table"""
    out_path = Path(out_path)
    if not table.rows or not any(row.curve_mean for row in table.rows.values()):
        raise ValidationError("nothing to plot")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(SVG_STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for row in table.rows.values():
            x = np.arange(1, len(row.curve_mean) + 1)
            mean = np.asarray(row.curve_mean)
            band = np.asarray(row.curve_stderr)
            (line,) = ax.plot(x, mean, label=row.agent, linewidth=1.5)
            ax.fill_between(x, mean - band, mean + band, color=line.get_color(), alpha=0.2, linewidth=0)
        ax.set_xlabel("life-cycle")
        ax.set_ylabel("average life-cycle reward")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info("Wrote %s", out_path)
    return out_path


def plot_records(records: Sequence[RunRecord], out_path: Path | str, title: str = "") -> Path:
    if not records:
        raise ValidationError("no records to plot")
    return plot_table(compute_metrics(records), out_path, title)


def emit_plot(csv_paths: Sequence[Path | str], out_path: Path | str) -> Path:
    """
    Plot one or more records CSVs as a single learning-curve figure.

    Raises:
        ValidationError: the inputs hold no records
    """
    records = read_many([Path(p) for p in csv_paths])
    return plot_records(records, out_path)
