"""
Representations fed to value networks: user features psi_u, one-hot action
features phi_a and the interaction features xi of the current life-cycle.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from src.core.errors import ConfigError


A1 = 1
A2 = 2


def one_hot(position: int, size: int) -> np.ndarray:
    vec = np.zeros(size)
    vec[position] = 1.0
    return vec


def extract_interact_features(history: Sequence[int], budget: int, width: Optional[int] = None) -> np.ndarray:
    """
    Encode the actions taken so far in a SeqRec life-cycle.

    Entry i (1-based) is -1 once i exceeds the life-cycle length L, 1 if the
    i-th action was a1 and 0 if it was a2.

    Args:
        history: Actions of the current life-cycle, oldest first
        budget: The user's engagement budget tau (feature length)
        width: Pad with -1 up to this length so users with different budgets share one input width

    Returns:
        Real vector of length max(budget, width)
    """
    if budget < 1:
        raise ConfigError("budget must be at least 1")
    size = budget if width is None else max(budget, width)
    xi = np.full(size, -1.0)
    for i, action in enumerate(history[:budget]):
        xi[i] = 1.0 if action == A1 else 0.0
    return xi


def concat_input(user_features: np.ndarray, action_features: np.ndarray, interact_features: np.ndarray) -> np.ndarray:
    """Network input [psi_u; phi_a; xi]"""
    return np.concatenate([user_features, action_features, interact_features])


def action_inputs(
    user_features: np.ndarray,
    action_table: dict[int, np.ndarray],
    interact_features: np.ndarray,
    actions: Sequence[int],
) -> np.ndarray:
    """One input row per candidate action"""
    return np.stack([concat_input(user_features, action_table[a], interact_features) for a in actions])
