"""
Table of mean ± standard error across seeds from one or more records CSVs.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

from src.harness.csvio import read_many
from src.harness.metrics import MetricsTable, compute_metrics


logger = logging.getLogger(__name__)


def aggregate(csv_paths: Sequence[Path | str]) -> MetricsTable:
    """
    Summarize the union of several record files.

    Raises:
        ValidationError: a file has another schema, or two files hold the same run
    """
    records = read_many([Path(p) for p in csv_paths])
    logger.info("Aggregating %d records from %d files", len(records), len(csv_paths))
    return compute_metrics(records)


def write_aggregate(table: MetricsTable, out_dir: Optional[Path | str]) -> Optional[Path]:
    """Write aggregate.json and aggregate.txt; returns the folder, or None without one"""
    if out_dir is None:
        return None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "aggregate.json").write_text(json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "aggregate.txt").write_text(table.to_text(), encoding="utf-8")
    logger.info("Wrote %s", out_dir / "aggregate.json")
    return out_dir
