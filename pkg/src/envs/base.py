"""
Environment contract shared by every simulator.

An environment holds a set of active users. Each time step every active user
receives one action from its allowed set, the environment advances, and each
user emits an observation and a reward. A user's life-cycle is the run of
steps between leave events; the harness records one RunRecord per life-cycle.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from src.core.errors import ContractViolation, UsageError


@dataclass(frozen=True)
class Observation:
    """What the agent may see of one user after a step"""

    satisfied: bool = False
    leave: bool = False
    engaged: bool = True


@dataclass
class StepResult:
    """Per-user outcome of one environment step"""

    observations: dict[int, Observation]
    rewards: dict[int, float]
    closed: dict[int, bool] = field(default_factory=dict)


class Environment(ABC):
    """Base class for multi-user recommendation simulators"""

    #: action ids; ties are broken towards the lowest id
    actions: tuple[int, ...] = ()
    action_names: Mapping[int, str] = {}
    #: action that is the only choice while a user is away, or None
    noop: Optional[int] = None

    def __init__(self):
        self._active: list[int] = []
        self._observations: dict[int, Observation] = {}

    @property
    def active_users(self) -> list[int]:
        return list(self._active)

    @abstractmethod
    def reset(self) -> dict[int, Observation]:
        """Restore the initial state and return every user's first observation"""

    def observe(self) -> dict[int, Observation]:
        return {u: self._observations[u] for u in self._active}

    def _require_active(self, user: int):
        if user not in self._active:
            raise UsageError(f"user {user} is not active")

    @abstractmethod
    def constraint(self, user: int) -> frozenset[int]:
        """Allowed actions for an active user given its latest observation"""

    def check_actions(self, actions: Mapping[int, int]):
        for user in self._active:
            if user not in actions:
                raise ContractViolation(f"no action supplied for active user {user}")
            if actions[user] not in self.constraint(user):
                name = self.action_names.get(actions[user], actions[user])
                raise ContractViolation(f"action {name} is not allowed for user {user}")

    @abstractmethod
    def step(self, actions: Mapping[int, int]) -> StepResult:
        """Advance every active user by one step"""

    @abstractmethod
    def user_features(self, user: int) -> np.ndarray:
        """psi_u"""

    @abstractmethod
    def action_features(self, action: int) -> np.ndarray:
        """phi_a"""

    @abstractmethod
    def interaction_features(self, user: int) -> np.ndarray:
        """xi for the user's current life-cycle"""

    def lifecycle_closed(self, user: int) -> bool:
        """True when the last step ended the user's life-cycle"""
        return False

    def lifecycle_steps(self) -> int:
        """Upper bound on the time steps one life-cycle occupies"""
        return 1

    def deactivate(self, user: int):
        """Remove a user from the active set for the rest of the run"""
        self._require_active(user)
        self._active.remove(user)

    def oracle_action(self, user: int) -> int:
        """Best action under full knowledge of the user"""
        raise UsageError(f"{type(self).__name__} has no oracle policy")

    @abstractmethod
    def log_fields(self, user: int) -> tuple[float, int, int]:
        """(Y, L, leave) columns of the transition log"""

    def action_table(self) -> dict[int, np.ndarray]:
        return {a: self.action_features(a) for a in self.actions if a != self.noop}

    def input_size(self) -> int:
        """Width of the network input [psi_u; phi_a; xi]; the environment must be reset"""
        if not self._active:
            raise UsageError("reset the environment before asking for its input width")
        user = self._active[0]
        action = next(a for a in self.actions if a != self.noop)
        return (
            self.user_features(user).shape[0]
            + self.action_features(action).shape[0]
            + self.interaction_features(user).shape[0]
        )
