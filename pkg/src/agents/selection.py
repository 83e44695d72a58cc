"""
Action selection rules.

Every rule scores the allowed actions and plays the argmax, breaking ties
towards the lowest action id. A singleton allowed set is returned directly.
"""

from __future__ import annotations

from typing import Collection, Optional

import numpy as np

from src.agents.last_layer import LastLayerStats
from src.core.errors import ConfigError, ContractViolation, UsageError
from src.enn.index import EpistemicIndex
from src.enn.network import ValueNetwork, enn_forward, last_layer_features
from src.envs.features import action_inputs


def _ordered(allowed: Collection[int]) -> list[int]:
    if not allowed:
        raise ContractViolation("the allowed action set is empty")
    return sorted(allowed)


def argmax_action(actions: list[int], scores: np.ndarray) -> int:
    """First (lowest-id) action with the highest score"""
    return actions[int(np.argmax(scores))]


def q_values(net: ValueNetwork, user_features, action_table, interact_features, actions, z=None) -> np.ndarray:
    rows = action_inputs(user_features, action_table, interact_features, actions)
    return np.atleast_1d(enn_forward(net, rows, z))


def dqn_select(net: ValueNetwork, user_features, action_table, interact_features, allowed) -> int:
    """Greedy action of a plain Q-network"""
    actions = _ordered(allowed)
    if len(actions) == 1:
        return actions[0]
    return argmax_action(actions, q_values(net, user_features, action_table, interact_features, actions))


def epsilon_greedy_select(
    net: ValueNetwork, user_features, action_table, interact_features, allowed, epsilon: float, rng: np.random.Generator
) -> int:
    """Uniform over allowed with probability epsilon, greedy otherwise"""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in [0, 1], got {epsilon}")
    actions = _ordered(allowed)
    if rng.random() < epsilon:
        return actions[int(rng.integers(len(actions)))]
    return dqn_select(net, user_features, action_table, interact_features, actions)


def rvf_select(
    net: ValueNetwork, z: Optional[EpistemicIndex], user_features, action_table, interact_features, allowed
) -> int:
    """Greedy action of the value function sampled by z"""
    if z is None:
        raise UsageError("no epistemic index set for this user")
    actions = _ordered(allowed)
    if len(actions) == 1:
        return actions[0]
    return argmax_action(actions, q_values(net, user_features, action_table, interact_features, actions, z))


def _bandit_terms(net, stats: LastLayerStats, user_features, action_table, interact_features, actions):
    rows = action_inputs(user_features, action_table, interact_features, actions)
    phi = last_layer_features(net, rows)
    return np.atleast_1d(enn_forward(net, rows)), phi, stats.variance(phi)


def neural_ts_select(
    net: ValueNetwork,
    stats: LastLayerStats,
    user_features,
    action_table,
    interact_features,
    allowed,
    nu: float,
    rng: np.random.Generator,
) -> int:
    """Argmax of one draw from Normal(Q, nu^2 phi^T A^-1 phi) per action"""
    actions = _ordered(allowed)
    if len(actions) == 1:
        return actions[0]
    mean, _, var = _bandit_terms(net, stats, user_features, action_table, interact_features, actions)
    draws = mean + nu * np.sqrt(np.maximum(var, 0.0)) * rng.standard_normal(len(actions))
    return argmax_action(actions, draws)


def neural_ucb_select(
    net: ValueNetwork, stats: LastLayerStats, user_features, action_table, interact_features, allowed, scale: float
) -> int:
    """Argmax of Q + scale * sqrt(phi^T A^-1 phi)"""
    actions = _ordered(allowed)
    if len(actions) == 1:
        return actions[0]
    mean, _, var = _bandit_terms(net, stats, user_features, action_table, interact_features, actions)
    return argmax_action(actions, mean + scale * np.sqrt(np.maximum(var, 0.0)))


def neural_linucb_select(
    net: ValueNetwork, stats: LastLayerStats, user_features, action_table, interact_features, allowed, scale: float
) -> int:
    """Argmax of theta_hat^T phi + scale * sqrt(phi^T A^-1 phi), theta_hat the ridge head"""
    actions = _ordered(allowed)
    if len(actions) == 1:
        return actions[0]
    _, phi, var = _bandit_terms(net, stats, user_features, action_table, interact_features, actions)
    return argmax_action(actions, phi @ stats.theta() + scale * np.sqrt(np.maximum(var, 0.0)))
