"""
SeqRec: deterministic sequential recommendation with sparse, delayed feedback.

Each engaged user accumulates satisfaction Y from the recommended actions.
The user leaves as soon as Y reaches the target b (reward 1), Y drops below
zero, or the life-cycle length L reaches the budget tau (reward 0). A user who
left takes the no-op on the next step and re-engages with Y = 0, L = 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

import numpy as np

from src.core.errors import ConfigError, ContractViolation
from src.envs.base import Environment, Observation, StepResult
from src.envs.features import A1, A2, extract_interact_features, one_hot


logger = logging.getLogger(__name__)

NOOP = 0
ACTION_NAMES = {NOOP: "noop", A1: "a1", A2: "a2"}
ENGAGED_ACTIONS = frozenset({A1, A2})
IDLE_ACTIONS = frozenset({NOOP})


def parse_action(name) -> int:
    for action, label in ACTION_NAMES.items():
        if name == label or name == action:
            return action
    raise ConfigError(f"unknown action {name!r}")


@dataclass(frozen=True, eq=False)
class UserProfile:
    """One simulated user"""

    id: int
    features: np.ndarray
    target: float
    budget: int
    preferred: int

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError(f"user {self.id}: budget must be at least 1")
        if not self.target > 0:
            raise ConfigError(f"user {self.id}: target satisfaction must be positive")
        if self.preferred not in ENGAGED_ACTIONS:
            raise ConfigError(f"user {self.id}: preferred action must be a1 or a2")


@dataclass
class SeqRecConfig:
    """Roster, satisfaction table g(u, a) and action features"""

    users: list[UserProfile]
    satisfaction: dict[tuple[int, int], float]
    action_features: dict[int, np.ndarray] = field(
        default_factory=lambda: {A1: one_hot(0, 2), A2: one_hot(1, 2), NOOP: np.zeros(2)}
    )

    def __post_init__(self):
        if not self.users:
            raise ConfigError("a SeqRec roster needs at least one user")
        ids = [u.id for u in self.users]
        if len(set(ids)) != len(ids):
            raise ConfigError("user ids must be unique")
        widths = {u.features.shape for u in self.users}
        if len(widths) != 1:
            raise ConfigError("every user must have the same feature width")
        for user in self.users:
            for action in ENGAGED_ACTIONS:
                if (user.id, action) not in self.satisfaction:
                    raise ConfigError(f"no satisfaction delta for user {user.id}, action {ACTION_NAMES[action]}")
        self._by_id = {u.id: u for u in self.users}

    def user(self, user_id: int) -> UserProfile:
        return self._by_id[user_id]

    @property
    def user_ids(self) -> list[int]:
        return [u.id for u in self.users]

    @property
    def max_budget(self) -> int:
        return max(u.budget for u in self.users)


@dataclass
class SeqRecState:
    """Per-user satisfaction Y, life-cycle length L, leave flag and current life-cycle actions"""

    Y: dict[int, float]
    L: dict[int, int]
    leave: dict[int, bool]
    satisfied: dict[int, bool]
    history: dict[int, tuple[int, ...]]

    @classmethod
    def initial(cls, config: SeqRecConfig) -> "SeqRecState":
        ids = config.user_ids
        return cls(
            Y={u: 0.0 for u in ids},
            L={u: 0 for u in ids},
            leave={u: False for u in ids},
            satisfied={u: False for u in ids},
            history={u: () for u in ids},
        )

    def observation(self, user: int) -> Observation:
        return Observation(satisfied=self.satisfied[user], leave=self.leave[user], engaged=not self.leave[user])


def seqrec_constraint(obs: Observation) -> frozenset[int]:
    return IDLE_ACTIONS if obs.leave else ENGAGED_ACTIONS


def transition_user(y: float, length: int, target: float, budget: int, delta: float) -> tuple[float, int, bool, bool]:
    """One engaged step: returns (Y', L', satisfied', leave')"""
    y_next = y + delta
    length_next = length + 1
    satisfied = y_next >= target
    leave = satisfied or y_next < 0 or length_next >= budget
    return y_next, length_next, satisfied, leave


def seqrec_step(
    state: SeqRecState, config: SeqRecConfig, actions: Mapping[int, int]
) -> tuple[SeqRecState, dict[int, Observation], dict[int, float]]:
    """
    Advance the users named in `actions` by one step.

    Args:
        state: Current state (not modified)
        config: Roster and satisfaction table
        actions: Action per user; must lie in the user's allowed set

    Returns:
        (next state, observation per user, reward per user)
    """
    Y, L = dict(state.Y), dict(state.L)
    leave, satisfied, history = dict(state.leave), dict(state.satisfied), dict(state.history)
    observations: dict[int, Observation] = {}
    rewards: dict[int, float] = {}

    for user, action in actions.items():
        allowed = seqrec_constraint(state.observation(user))
        if action not in allowed:
            raise ContractViolation(f"action {ACTION_NAMES.get(action, action)} is not allowed for user {user}")
        if state.leave[user]:
            Y[user], L[user], leave[user], satisfied[user], history[user] = 0.0, 0, False, False, ()
        else:
            profile = config.user(user)
            Y[user], L[user], satisfied[user], leave[user] = transition_user(
                state.Y[user], state.L[user], profile.target, profile.budget, config.satisfaction[(user, action)]
            )
            history[user] = state.history[user] + (action,)
        rewards[user] = 1.0 if satisfied[user] else 0.0

    new_state = SeqRecState(Y=Y, L=L, leave=leave, satisfied=satisfied, history=history)
    for user in actions:
        observations[user] = new_state.observation(user)
    return new_state, observations, rewards


def toy_config(target: float = 10.0, budget: int = 10) -> SeqRecConfig:
    """Single user, g(a1) = 0, g(a2) = 1, no user features"""
    user = UserProfile(id=0, features=np.zeros(0), target=target, budget=budget, preferred=A2)
    return SeqRecConfig(users=[user], satisfaction={(0, A1): 0.0, (0, A2): 1.0})


def config_from_mapping(table: Mapping[str, Any]) -> SeqRecConfig:
    """
    Build a roster from an `[[environment.users]]` list.

    Each entry has id, target, budget, an optional `features` list, and a
    `satisfaction` table mapping a1/a2 to the per-step delta. The preferred
    action defaults to the one with the larger delta.
    """
    entries = table.get("users")
    if not entries:
        raise ConfigError("environment.users must list at least one user")
    users, satisfaction = [], {}
    for entry in entries:
        try:
            user_id = int(entry["id"])
            deltas = {parse_action(k): float(v) for k, v in entry["satisfaction"].items()}
            target = float(entry["target"])
            budget = int(entry["budget"])
        except KeyError as exc:
            raise ConfigError(f"user entry is missing {exc}") from exc
        for action in ENGAGED_ACTIONS:
            satisfaction[(user_id, action)] = deltas.get(action, 0.0)
        preferred = entry.get("preferred")
        preferred = parse_action(preferred) if preferred is not None else max(
            ENGAGED_ACTIONS, key=lambda a: (satisfaction[(user_id, a)], -a)
        )
        features = np.asarray(entry.get("features", []), dtype=np.float64)
        users.append(UserProfile(user_id, features, target, budget, preferred))
    return SeqRecConfig(users=users, satisfaction=satisfaction)


class SeqRecEnvironment(Environment):
    """Multi-user SeqRec simulator; all active users move in lock-step"""

    actions = (NOOP, A1, A2)
    action_names = ACTION_NAMES
    noop = NOOP

    def __init__(self, config: SeqRecConfig, feature_width: Optional[int] = None):
        """
        Args:
            config: Roster and satisfaction table
            feature_width: Length of xi; defaults to the roster's largest budget
        """
        super().__init__()
        self.config = config
        self.feature_width = feature_width or config.max_budget
        self.state = SeqRecState.initial(config)
        self._closed: dict[int, bool] = {}

    def reset(self) -> dict[int, Observation]:
        self.state = SeqRecState.initial(self.config)
        self._active = list(self.config.user_ids)
        self._observations = {u: self.state.observation(u) for u in self._active}
        self._closed = {u: False for u in self._active}
        return self.observe()

    def constraint(self, user: int) -> frozenset[int]:
        self._require_active(user)
        return seqrec_constraint(self._observations[user])

    def step(self, actions: Mapping[int, int]) -> StepResult:
        self.check_actions(actions)
        moving = {u: actions[u] for u in self._active}
        was_leaving = {u: self.state.leave[u] for u in moving}
        self.state, observations, rewards = seqrec_step(self.state, self.config, moving)
        self._observations.update(observations)
        self._closed = {u: observations[u].leave and not was_leaving[u] for u in moving}
        return StepResult(observations=observations, rewards=rewards, closed=dict(self._closed))

    def user_features(self, user: int) -> np.ndarray:
        return self.config.user(user).features

    def action_features(self, action: int) -> np.ndarray:
        return self.config.action_features[action]

    def interaction_features(self, user: int) -> np.ndarray:
        profile = self.config.user(user)
        return extract_interact_features(self.state.history[user], profile.budget, self.feature_width)

    def lifecycle_closed(self, user: int) -> bool:
        return self._closed.get(user, False)

    def lifecycle_steps(self) -> int:
        # engaged steps plus the no-op step that re-engages the user
        return self.config.max_budget + 1

    def oracle_action(self, user: int) -> int:
        allowed = self.constraint(user)
        preferred = self.config.user(user).preferred
        return preferred if preferred in allowed else min(allowed)

    def log_fields(self, user: int) -> tuple[float, int, int]:
        return self.state.Y[user], self.state.L[user], int(self.state.leave[user])
