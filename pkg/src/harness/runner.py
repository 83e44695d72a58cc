"""
Seeded experiment sweeps.

Each (agent, seed) pair is an independent job: build the environment and the
agent from per-component rngs, roll out every user's life-cycles while
selecting, storing and training, and hand back the run records. Jobs run in a
process pool when the config asks for more than one worker; results are
reduced in submission order so the artifacts do not depend on scheduling.
"""

from __future__ import annotations

import json
import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from src.agents.agent import Agent, commitment_violations, make_agent
from src.agents.replay import Transition
from src.config.experiment_config import NEURAL_KINDS, ExperimentConfig
from src.core.checkpoint import Checkpoint, save_checkpoint
from src.core.errors import NumericError, UsageError
from src.envs.base import Environment
from src.envs.factory import build_environment
from src.harness.csvio import DECISION_FIELDS, TRANSITION_FIELDS, RunRecord, write_csv, write_records
from src.harness.metrics import MetricsTable, compute_metrics
from src.harness.plotting import plot_table


logger = logging.getLogger(__name__)


@dataclass
class Rollout:
    """What one pass over an environment produced"""

    records: list[RunRecord] = field(default_factory=list)
    transitions: list[dict] = field(default_factory=list)
    decisions: list[dict] = field(default_factory=list)
    steps: int = 0


@dataclass
class SeedResult:
    agent: str
    seed: int
    records: list[RunRecord]
    wall_seconds: float
    violations: int = 0
    transitions: list[dict] = field(default_factory=list)
    decisions: list[dict] = field(default_factory=list)
    checkpoint: Optional[Checkpoint] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class ExperimentResult:
    records: list[RunRecord]
    metrics: MetricsTable
    failures: list[SeedResult]
    paths: dict[str, Path]


def run_id(agent: str, seed: int) -> str:
    return f"{agent}-seed{seed}"


def _format_values(env: Environment, values) -> str:
    return ";".join(f"{env.action_names.get(a, a)}={v!r}" for a, v in values)


def rollout(
    agent: Agent,
    env: Environment,
    seed: int,
    life_cycles: int,
    learn: bool = True,
    log_transitions: bool = False,
) -> Rollout:
    """
    Run every user of `env` through `life_cycles` life-cycles.

    All active users move in lock-step. A user leaves the active set once its
    life-cycles are done. No-op steps only re-engage the user and are not
    stored for learning.

    Args:
        agent: Acting (and, with learn=True, learning) agent
        env: Environment; reset here
        seed: Written into every RunRecord
        life_cycles: Life-cycles per user
        learn: Feed transitions to the agent and train after every step
        log_transitions: Keep one row per (step, user) for transitions.csv

    Returns:
        Rollout with one RunRecord per (user, life-cycle)
    """
    env.reset()
    out = Rollout()
    rid = run_id(agent.name, seed)
    users = env.active_users
    completed = {u: 0 for u in users}
    reward_sum: dict[int, float] = defaultdict(float)
    step_count: dict[int, int] = defaultdict(int)
    boundary = {u: False for u in users}
    max_steps = life_cycles * env.lifecycle_steps()
    if learn:
        agent.plan(max_steps)

    t = 0
    while env.active_users:
        if t >= max_steps:
            raise UsageError(f"{rid}: users still active after {max_steps} steps")
        active = env.active_users
        actions, inputs = {}, {}
        for u in active:
            allowed = env.constraint(u)
            psi, xi = env.user_features(u), env.interaction_features(u)
            actions[u] = agent.act(t, u, psi, xi, allowed, boundary[u])
            inputs[u] = (psi, xi)
        result = env.step(actions)

        for u in active:
            action, reward = actions[u], result.rewards[u]
            closed = result.closed.get(u, False)
            if log_transitions:
                y, length, leave = env.log_fields(u)
                out.transitions.append(
                    {
                        "run_id": rid,
                        "t": t,
                        "user": u,
                        "action": env.action_names.get(action, action),
                        "reward": float(reward),
                        "Y": float(y),
                        "L": length,
                        "leave": leave,
                    }
                )
            if action == env.noop:
                boundary[u] = False
                continue

            reward_sum[u] += reward
            step_count[u] += 1
            next_allowed = env.constraint(u)
            terminal = closed or (env.noop is not None and next_allowed == {env.noop})
            if learn:
                psi, xi = inputs[u]
                next_actions = () if terminal else tuple(sorted(a for a in next_allowed if a != env.noop))
                agent.observe(
                    u,
                    Transition(
                        user_features=psi,
                        action_features=env.action_features(action),
                        interact_features=xi,
                        reward=float(reward),
                        next_interact_features=env.interaction_features(u),
                        next_actions=next_actions,
                        terminal=terminal,
                    ),
                )

            # windowed environments have no no-op step to mark the new life-cycle
            boundary[u] = closed and env.noop is None
            if closed:
                completed[u] += 1
                out.records.append(RunRecord(agent.name, seed, u, completed[u], reward_sum[u], step_count[u]))
                reward_sum[u], step_count[u] = 0.0, 0
                if completed[u] >= life_cycles:
                    env.deactivate(u)

        if learn:
            agent.train_step()
        t += 1

    out.steps = t
    out.decisions = [
        {
            "run_id": rid,
            "t": d.t,
            "user": d.user,
            "z_digest": d.digest,
            "action": env.action_names.get(d.action, d.action),
            "q_values": _format_values(env, d.values),
        }
        for d in agent.decisions
    ]
    return out


def run_seed(config: ExperimentConfig, agent_name: str, seed: int) -> SeedResult:
    """
    Train one agent for one seed.

    Raises:
        NumericError: non-finite loss, or a frozen prior drifted during training
    """
    spec = config.agent(agent_name)
    env = build_environment(config.environment, seed)
    env.reset()
    agent = make_agent(spec, env, seed)
    agent.record_decisions = config.write_decisions

    logger.info("Starting %s (%s), seed %d", spec.name, spec.kind, seed)
    started = time.perf_counter()
    out = rollout(agent, env, seed, config.life_cycles, learn=True, log_transitions=config.write_transitions)
    wall = time.perf_counter() - started

    if spec.kind in NEURAL_KINDS:
        agent.net.verify_priors()
    violations = commitment_violations(agent.index_log)
    if violations:
        logger.error("%s: %d index commitment violations, first at t=%d user %d",
                     run_id(spec.name, seed), len(violations), violations[0].t, violations[0].user)

    checkpoint = None
    if config.write_checkpoints and spec.kind in NEURAL_KINDS:
        checkpoint = agent.to_checkpoint()
        checkpoint.meta["seed"] = seed
        checkpoint.meta["experiment"] = config.name

    logger.info("Finished %s seed %d: %d life-cycles, %d steps, %.1fs", spec.name, seed, len(out.records), out.steps, wall)
    return SeedResult(
        agent=spec.name,
        seed=seed,
        records=out.records,
        wall_seconds=wall,
        violations=len(violations),
        transitions=out.transitions,
        decisions=out.decisions,
        checkpoint=checkpoint,
    )


def _run_seed_job(config: ExperimentConfig, agent_name: str, seed: int) -> SeedResult:
    """Process-pool entry point; a numeric failure ends only this seed"""
    try:
        return run_seed(config, agent_name, seed)
    except NumericError as exc:
        logger.exception("%s aborted", run_id(agent_name, seed))
        return SeedResult(agent=agent_name, seed=seed, records=[], wall_seconds=0.0, error=str(exc))


def run_jobs(config: ExperimentConfig) -> list[SeedResult]:
    jobs = [(spec.name, seed) for spec in config.agents for seed in config.seeds]
    if config.workers == 1:
        return [_run_seed_job(config, name, seed) for name, seed in jobs]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(_run_seed_job, config, name, seed) for name, seed in jobs]
        return [f.result() for f in futures]


def log_timings(results: list[SeedResult]) -> dict[str, float]:
    """Log the mean wall-clock seconds per agent; timings stay out of the artifacts"""
    walls: dict[str, list[float]] = defaultdict(list)
    for r in results:
        walls[r.agent].append(r.wall_seconds)
    means = {agent: sum(w) / len(w) for agent, w in walls.items()}
    for agent, seconds in means.items():
        logger.info("%s: %.2fs per run over %d runs", agent, seconds, len(walls[agent]))
    return means


def run_experiment(config: ExperimentConfig, out_dir: Path | str) -> ExperimentResult:
    """
    Run every agent over every seed and write the sweep's artifacts.

    Writes records.csv, metrics.json, summary.txt and learning_curve.svg into
    `out_dir`, plus transitions.csv, decisions.csv and checkpoints/ when the
    config enables them.

    Raises:
        NumericError: every run failed, so there is nothing to summarize
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("Experiment %s: %d agents x %d seeds, %d life-cycles each",
                config.name, len(config.agents), len(config.seeds), config.life_cycles)

    results = run_jobs(config)
    failures = [r for r in results if r.failed]
    for failure in failures:
        logger.warning("Excluding %s from the aggregates: %s", run_id(failure.agent, failure.seed), failure.error)
    done = [r for r in results if not r.failed]
    if not done:
        raise NumericError("every run failed; no records to summarize")

    records = [rec for r in done for rec in r.records]
    table = compute_metrics(records)
    log_timings(done)

    paths = {"records": write_records(out_dir / "records.csv", records)}
    if config.write_transitions:
        paths["transitions"] = write_csv(out_dir / "transitions.csv", TRANSITION_FIELDS, (row for r in done for row in r.transitions))
    if config.write_decisions:
        paths["decisions"] = write_csv(out_dir / "decisions.csv", DECISION_FIELDS, (row for r in done for row in r.decisions))
    for r in done:
        if r.checkpoint is not None:
            save_checkpoint(out_dir / "checkpoints" / f"{run_id(r.agent, r.seed)}.ckpt", r.checkpoint)

    report = {
        "experiment": config.name,
        "metrics": table.to_dict(),
        "failures": [{"agent": r.agent, "seed": r.seed, "error": r.error} for r in failures],
        "commitment_violations": {run_id(r.agent, r.seed): r.violations for r in done if r.violations},
    }
    paths["metrics"] = out_dir / "metrics.json"
    paths["metrics"].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths["summary"] = out_dir / "summary.txt"
    paths["summary"].write_text(table.to_text(), encoding="utf-8")
    paths["plot"] = plot_table(table, out_dir / "learning_curve.svg", title=config.name)

    logger.info("Experiment %s done\n%s", config.name, table.to_text())
    return ExperimentResult(records=records, metrics=table, failures=failures, paths=paths)
