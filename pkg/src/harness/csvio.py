"""
CSV artifacts: versioned run records, transition logs and decision logs.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

from src.core.errors import ValidationError


logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True, order=True)
class RunRecord:
    """Reward collected by one user during one life-cycle"""

    agent: str
    seed: int
    user: int
    life_cycle: int
    reward: float
    steps: int


RECORD_FIELDS = ["schema_version"] + [f.name for f in fields(RunRecord)]
TRANSITION_FIELDS = ["run_id", "t", "user", "action", "reward", "Y", "L", "leave"]
DECISION_FIELDS = ["run_id", "t", "user", "z_digest", "action", "q_values"]


def _format(value: Any) -> Any:
    return repr(float(value)) if isinstance(value, float) else value


def write_csv(path: Path, fieldnames: Sequence[str], rows: Iterable[dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format(row.get(k, "")) for k in fieldnames})
    logger.info("Wrote %s", path)
    return path


def write_records(path: Path, records: Iterable[RunRecord]) -> Path:
    """Records sorted by (agent, seed, user, life_cycle); every row carries the schema version"""
    rows = ({"schema_version": SCHEMA_VERSION, **dict(zip(RECORD_FIELDS[1:], astuple(r)))} for r in sorted(records))
    return write_csv(path, RECORD_FIELDS, rows)


def read_records(path: Path) -> list[RunRecord]:
    """
    Parse a records CSV.

    Raises:
        ValidationError: header or schema version differs, or a row is malformed
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != RECORD_FIELDS:
                raise ValidationError(f"{path}: expected columns {RECORD_FIELDS}, got {reader.fieldnames}")
            records = []
            for line, row in enumerate(reader, start=2):
                if row["schema_version"] != str(SCHEMA_VERSION):
                    raise ValidationError(f"{path}:{line}: unsupported schema_version {row['schema_version']!r}")
                try:
                    records.append(
                        RunRecord(
                            agent=row["agent"],
                            seed=int(row["seed"]),
                            user=int(row["user"]),
                            life_cycle=int(row["life_cycle"]),
                            reward=float(row["reward"]),
                            steps=int(row["steps"]),
                        )
                    )
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"{path}:{line}: malformed row: {exc}") from exc
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    return records


def read_many(paths: Sequence[Path]) -> list[RunRecord]:
    """Union of several record files; the same (agent, seed, user, life_cycle) may appear only once"""
    seen, out = set(), []
    for path in paths:
        for record in read_records(path):
            key = (record.agent, record.seed, record.user, record.life_cycle)
            if key in seen:
                raise ValidationError(f"{path}: duplicate record for agent {record.agent}, seed {record.seed}, "
                                      f"user {record.user}, life-cycle {record.life_cycle}")
            seen.add(key)
            out.append(record)
    return out
