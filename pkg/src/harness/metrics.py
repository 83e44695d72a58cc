"""
Average life-cycle cumulative reward across users, per run and across seeds.

For one run (agent, seed) the score is (1/|U|) sum_u mean over u's
life-cycles of the reward collected in that life-cycle. Seeds are then
summarized by mean, standard error (ddof=1 std / sqrt(n)) and std.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from src.core.errors import ValidationError
from src.harness.csvio import RunRecord


logger = logging.getLogger(__name__)


def mean_stderr(values: Sequence[float], label: str = "") -> tuple[float, float, float]:
    """(mean, standard error, standard deviation); a single value has error 0"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("no values to summarize")
    if arr.size == 1:
        logger.warning("Only one seed%s: standard error reported as 0", f" for {label}" if label else "")
        return float(arr[0]), 0.0, 0.0
    std = float(arr.std(ddof=1))
    return float(arr.mean()), std / np.sqrt(arr.size), std


def run_score(records: Iterable[RunRecord]) -> float:
    """Average over users of each user's mean life-cycle reward"""
    per_user: dict[int, list[float]] = defaultdict(list)
    for r in records:
        per_user[r.user].append(r.reward)
    if not per_user:
        raise ValidationError("run has no records")
    return float(np.mean([np.mean(v) for v in per_user.values()]))


def per_user_total(records: Iterable[RunRecord]) -> float:
    """(1/|U|) sum_u sum_t R_{t,u}"""
    totals: dict[int, float] = defaultdict(float)
    for r in records:
        totals[r.user] += r.reward
    if not totals:
        raise ValidationError("run has no records")
    return float(np.mean(list(totals.values())))


def lifecycle_curve(records: Iterable[RunRecord]) -> dict[int, float]:
    """Mean reward across users at each life-cycle index"""
    by_index: dict[int, list[float]] = defaultdict(list)
    for r in records:
        by_index[r.life_cycle].append(r.reward)
    return {k: float(np.mean(v)) for k, v in sorted(by_index.items())}


@dataclass
class AgentMetrics:
    """Seed-level summary of one agent"""

    agent: str
    seeds: list[int]
    seed_scores: list[float]
    mean: float
    stderr: float
    std: float
    per_user_total: float
    per_user_total_stderr: float
    curve_mean: list[float] = field(default_factory=list)
    curve_stderr: list[float] = field(default_factory=list)

    @property
    def n_seeds(self) -> int:
        return len(self.seeds)


@dataclass
class MetricsTable:
    rows: dict[str, AgentMetrics]

    def to_dict(self) -> dict:
        return {name: asdict(row) for name, row in self.rows.items()}

    def to_text(self) -> str:
        """Aligned table: agent, seeds, mean +- stderr, std, per-user total"""
        header = ["agent", "seeds", "avg life-cycle reward", "std", "per-user total"]
        lines = []
        for row in self.rows.values():
            lines.append(
                [
                    row.agent,
                    str(row.n_seeds),
                    f"{row.mean:.3f} ± {row.stderr:.3f}",
                    f"{row.std:.3f}",
                    f"{row.per_user_total:.3f} ± {row.per_user_total_stderr:.3f}",
                ]
            )
        widths = [max(len(r[k]) for r in [header] + lines) for k in range(len(header))]
        fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        return "\n".join([fmt(header), fmt(["-" * w for w in widths])] + [fmt(r) for r in lines]) + "\n"


def agent_metrics(agent: str, records: Sequence[RunRecord]) -> AgentMetrics:
    by_seed: dict[int, list[RunRecord]] = defaultdict(list)
    for r in records:
        by_seed[r.seed].append(r)
    seeds = sorted(by_seed)
    scores = [run_score(by_seed[s]) for s in seeds]
    totals = [per_user_total(by_seed[s]) for s in seeds]
    mean, stderr, std = mean_stderr(scores, agent)
    total_mean, total_stderr, _ = mean_stderr(totals, agent) if len(totals) > 1 else (totals[0], 0.0, 0.0)

    curves = [lifecycle_curve(by_seed[s]) for s in seeds]
    length = min(len(c) for c in curves)
    curve_mean, curve_stderr = [], []
    for k in range(length):
        values = np.array([list(c.values())[k] for c in curves])
        curve_mean.append(float(values.mean()))
        curve_stderr.append(float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0)

    return AgentMetrics(agent, seeds, scores, mean, stderr, std, total_mean, total_stderr, curve_mean, curve_stderr)


def compute_metrics(records: Sequence[RunRecord]) -> MetricsTable:
    """Summarize records per agent, agents in first-seen order"""
    if not records:
        raise ValidationError("no run records to summarize")
    by_agent: dict[str, list[RunRecord]] = {}
    for r in records:
        by_agent.setdefault(r.agent, []).append(r)
    return MetricsTable({agent: agent_metrics(agent, recs) for agent, recs in by_agent.items()})
