"""
Out-of-sample evaluation of a trained checkpoint without further training.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from src.agents.agent import Agent, agent_from_checkpoint
from src.config.experiment_config import ExperimentConfig
from src.core.checkpoint import load_checkpoint
from src.core.errors import UsageError, ValidationError
from src.envs.base import Environment
from src.envs.factory import build_eval_environment
from src.harness.csvio import RunRecord
from src.harness.metrics import MetricsTable, compute_metrics
from src.harness.runner import rollout


logger = logging.getLogger(__name__)


def rollout_frozen(agent: Agent, env: Environment, seed: int, life_cycles: int) -> list[RunRecord]:
    """
    Roll a frozen agent through every user's life-cycles.

    Raises:
        UsageError: the agent's parameters changed during the rollout
    """
    agent.freeze()
    before = agent.checksum()
    records = rollout(agent, env, seed, life_cycles, learn=False).records
    after = agent.checksum()
    if after != before:
        raise UsageError(f"{agent.name}: parameters changed during evaluation")
    return records


def evaluate_frozen(
    checkpoint_path: Path | str, config: ExperimentConfig, life_cycles: Optional[int] = None
) -> tuple[MetricsTable, list[RunRecord]]:
    """
    Evaluate a checkpoint on the config's evaluation roster.

    The roster is rebuilt from the seed stored in the checkpoint, so spawned
    evaluation users are the ones held out when that checkpoint was trained.

    Args:
        checkpoint_path: File written by `run` with write_checkpoints enabled
        config: Experiment config naming the evaluation roster
        life_cycles: Life-cycles per evaluation user; defaults to the config's

    Raises:
        ValidationError: no evaluation roster, or it overlaps the training users
    """
    ckpt = load_checkpoint(checkpoint_path)
    if not config.environment.has_eval_roster:
        raise ValidationError(f"{config.name} defines no evaluation roster (eval_users or eval_spawn)")
    seed = int(ckpt.meta.get("seed", config.seeds[0]))
    env = build_eval_environment(config.environment, seed)
    env.reset()
    agent = agent_from_checkpoint(ckpt, env, seed)
    logger.info("Evaluating %s (%s) on %d held-out users", agent.name, agent.kind, len(env.active_users))
    records = rollout_frozen(agent, env, seed, life_cycles or config.life_cycles)
    return compute_metrics(records), records
