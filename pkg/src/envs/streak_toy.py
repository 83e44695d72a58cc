"""
StreakToy: a single user who tolerates at most nine recommendations in a row.

The tenth consecutive recommendation disengages the user for 100 steps,
counting that step: the next 100 observations are 0 and only skip is
allowed. The user then re-engages with the streak reset. Reward is the
observation itself.

The harness slices the otherwise unbounded stream into windows of fixed
length; each window is one recorded life-cycle and starts from a fresh state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from src.core.errors import ConfigError, ContractViolation
from src.envs.base import Environment, Observation, StepResult
from src.envs.features import one_hot


SKIP = 0
RECOMMEND = 1
ACTION_NAMES = {SKIP: "skip", RECOMMEND: "recommend"}

STREAK_LIMIT = 10
DISENGAGE_STEPS = 100
DEFAULT_WINDOW = 110
USER = 0


@dataclass(frozen=True)
class StreakState:
    streak: int = 0
    disengaged_left: int = 0
    engaged: bool = True


def streak_constraint(obs: Observation) -> frozenset[int]:
    return frozenset({SKIP, RECOMMEND}) if obs.engaged else frozenset({SKIP})


def streak_step(state: StreakState, action: int) -> tuple[StreakState, Observation, float]:
    """
    Advance the user by one step.

    Returns:
        (next state, observation, reward) with reward = engaged bit
    """
    if action not in (SKIP, RECOMMEND):
        raise ContractViolation(f"unknown StreakToy action {action!r}")
    if action == RECOMMEND and not state.engaged:
        raise ContractViolation("cannot recommend to a disengaged user")

    if not state.engaged:
        if state.disengaged_left > 0:
            nxt = StreakState(streak=0, disengaged_left=state.disengaged_left - 1, engaged=False)
        else:
            nxt = StreakState()
    elif action == RECOMMEND:
        streak = state.streak + 1
        if streak >= STREAK_LIMIT:
            # the triggering step is the first disengaged observation
            nxt = StreakState(streak=0, disengaged_left=DISENGAGE_STEPS - 1, engaged=False)
        else:
            nxt = StreakState(streak=streak)
    else:
        nxt = StreakState()

    obs = Observation(engaged=nxt.engaged)
    return nxt, obs, float(nxt.engaged)


class StreakToyEnvironment(Environment):
    """One StreakToy user behind the multi-user contract"""

    actions = (SKIP, RECOMMEND)
    action_names = ACTION_NAMES
    noop = None

    def __init__(self, window: int = DEFAULT_WINDOW):
        super().__init__()
        if window < 1:
            raise ConfigError("window must be at least 1")
        self.window = window
        self.state = StreakState()
        self.position = 0
        self._closed = False

    def reset(self) -> dict[int, Observation]:
        self.state = StreakState()
        self.position = 0
        self._closed = False
        self._active = [USER]
        self._observations = {USER: Observation()}
        return self.observe()

    def constraint(self, user: int) -> frozenset[int]:
        self._require_active(user)
        return streak_constraint(self._observations[user])

    def step(self, actions: Mapping[int, int]) -> StepResult:
        self.check_actions(actions)
        rewards, observations = {}, {}
        if USER in self._active:
            self.state, obs, reward = streak_step(self.state, actions[USER])
            self.position += 1
            self._closed = self.position >= self.window
            if self._closed:
                # the next window starts from a fresh user
                self.state = StreakState()
                self.position = 0
            observations[USER] = obs
            rewards[USER] = reward
            self._observations[USER] = Observation() if self._closed else obs
        return StepResult(observations=observations, rewards=rewards, closed={USER: self._closed})

    def user_features(self, user: int) -> np.ndarray:
        return np.zeros(0)

    def action_features(self, action: int) -> np.ndarray:
        return one_hot(action, len(self.actions))

    def interaction_features(self, user: int) -> np.ndarray:
        return np.array(
            [
                self.state.streak / STREAK_LIMIT,
                self.state.disengaged_left / DISENGAGE_STEPS,
                self.position / self.window,
            ]
        )

    def lifecycle_closed(self, user: int) -> bool:
        return self._closed

    def lifecycle_steps(self) -> int:
        return self.window

    def oracle_action(self, user: int) -> int:
        if not self.constraint(user) >= {RECOMMEND}:
            return SKIP
        return SKIP if self.state.streak == STREAK_LIMIT - 1 else RECOMMEND

    def log_fields(self, user: int) -> tuple[float, int, int]:
        return float(self.state.streak), self.state.disengaged_left, int(not self.state.engaged)
