"""
Generated SeqRec rosters for the multi-user experiments.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from src.core.errors import ConfigError
from src.envs.features import A1, A2, one_hot
from src.envs.seqrec import SeqRecConfig, UserProfile


logger = logging.getLogger(__name__)

PREFERENCE_DIM = 4


def preference_vector(preferred: int, rng: np.random.Generator) -> np.ndarray:
    """
    4-d preference encoding. The sign of the first entry is the preferred
    action (+ for a2, - for a1) and its magnitude is at least 0.5, so a
    linear readout of that entry separates the two groups exactly.
    """
    vec = np.empty(PREFERENCE_DIM)
    sign = 1.0 if preferred == A2 else -1.0
    vec[0] = sign * rng.uniform(0.5, 1.0)
    vec[1:] = rng.normal(0.0, 0.5, size=PREFERENCE_DIM - 1)
    return vec


def multi_user_spawn(
    n_users: int,
    rng: np.random.Generator,
    target: float = 10.0,
    budget: int = 10,
    id_offset: int = 0,
    id_width: Optional[int] = None,
) -> SeqRecConfig:
    """
    Build a roster of N users, half preferring a1 and half a2.

    Satisfaction grows by 1 per step on the preferred action and stays put on
    the other one, so a life-cycle pays off only if every pick is preferred.

    Args:
        n_users: Number of users N
        rng: Seeded generator
        target: Satisfaction target b for every user
        budget: Engagement budget tau for every user
        id_offset: First user id (evaluation rosters use ids past the training roster)
        id_width: Width of the one-hot id block; ids outside [0, id_width) get an all-zero block

    Returns:
        SeqRecConfig with user features [one-hot id; preference vector]
    """
    if n_users < 1:
        raise ConfigError("n_users must be at least 1")
    width = n_users if id_width is None else id_width
    labels = np.array([A1] * (n_users // 2) + [A2] * (n_users - n_users // 2))
    labels = labels[rng.permutation(n_users)]

    users, satisfaction = [], {}
    for k, preferred in enumerate(labels):
        user_id = id_offset + k
        id_block = one_hot(user_id, width) if 0 <= user_id < width else np.zeros(width)
        features = np.concatenate([id_block, preference_vector(int(preferred), rng)])
        users.append(UserProfile(user_id, features, target, budget, int(preferred)))
        for action in (A1, A2):
            satisfaction[(user_id, action)] = 1.0 if action == preferred else 0.0
    logger.debug("Spawned %d users (ids %d..%d)", n_users, id_offset, id_offset + n_users - 1)
    return SeqRecConfig(users=users, satisfaction=satisfaction)
