"""
Build environments from an EnvSpec.
"""

from __future__ import annotations

import logging
from typing import Optional

from src.config.experiment_config import EnvSpec
from src.core.errors import ValidationError
from src.core.rng import component_rng
from src.envs.base import Environment
from src.envs.roster import PREFERENCE_DIM, multi_user_spawn
from src.envs.seqrec import SeqRecConfig, SeqRecEnvironment, config_from_mapping, toy_config
from src.envs.streak_toy import StreakToyEnvironment


logger = logging.getLogger(__name__)


def training_roster(spec: EnvSpec, seed: int) -> SeqRecConfig:
    if spec.users is not None:
        return config_from_mapping({"users": spec.users})
    if spec.spawn is not None:
        return multi_user_spawn(spec.spawn, component_rng(seed, "environment", "roster"), spec.target, spec.budget)
    return toy_config(spec.target, spec.budget)


def eval_roster(spec: EnvSpec, seed: int, train: SeqRecConfig) -> Optional[SeqRecConfig]:
    """
    Out-of-sample users. Spawned evaluation users take ids after the training
    roster and keep its one-hot width, so their id block is all zeros.
    """
    if spec.eval_users is not None:
        roster = config_from_mapping({"users": spec.eval_users})
    elif spec.eval_spawn is not None:
        first_id = max(train.user_ids) + 1
        width = train.users[0].features.shape[0] - PREFERENCE_DIM
        if width < 0:
            raise ValidationError("eval_spawn needs a spawned training roster")
        roster = multi_user_spawn(
            spec.eval_spawn,
            component_rng(seed, "environment", "eval-roster"),
            spec.target,
            spec.budget,
            id_offset=first_id,
            id_width=width,
        )
    else:
        return None
    overlap = set(roster.user_ids) & set(train.user_ids)
    if overlap:
        raise ValidationError(f"evaluation roster shares users {sorted(overlap)} with the training roster")
    return roster


def build_environment(spec: EnvSpec, seed: int) -> Environment:
    if spec.kind == "streak_toy":
        return StreakToyEnvironment(window=spec.window)
    return SeqRecEnvironment(training_roster(spec, seed))


def build_eval_environment(spec: EnvSpec, seed: int) -> Optional[Environment]:
    """Environment over the evaluation roster, sharing the training input widths"""
    if not spec.has_eval_roster:
        return None
    train = training_roster(spec, seed)
    roster = eval_roster(spec, seed, train)
    if roster.users[0].features.shape != train.users[0].features.shape:
        raise ValidationError("evaluation users must have the training roster's feature width")
    if roster.max_budget > train.max_budget:
        raise ValidationError("evaluation budgets may not exceed the training budgets")
    return SeqRecEnvironment(roster, feature_width=train.max_budget)
