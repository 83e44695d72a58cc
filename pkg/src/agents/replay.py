"""
Replay storage: transitions, uniformly sampled FIFO buffers and perturbed
storage for randomized value functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from src.core.cache import RingCache
from src.core.errors import ConfigError, UsageError
from src.enn.index import ENSEMBLE


@dataclass(frozen=True, eq=False)
class Transition:
    """
    One learning sample.

    next_actions are the actions the target network maximizes over; it is
    empty exactly when the transition is terminal (the user left, or the
    life-cycle window closed). An environment whose next allowed set is
    only the no-op is stored this way too: the no-op is never a maximization
    candidate, so {no-op} and the empty tuple both mean "bootstrap nothing".
    """

    user_features: np.ndarray
    action_features: np.ndarray
    interact_features: np.ndarray
    reward: float
    next_interact_features: np.ndarray
    next_actions: tuple[int, ...]
    terminal: bool
    true_reward: float = field(default=float("nan"))

    def __post_init__(self):
        if self.terminal != (len(self.next_actions) == 0):
            raise UsageError("terminal transitions have no next actions and vice versa")
        if np.isnan(self.true_reward):
            object.__setattr__(self, "true_reward", float(self.reward))

    def with_noise(self, noise: float) -> "Transition":
        return replace(self, reward=self.true_reward + float(noise))


class ReplayBuffer:
    """FIFO ring of transitions with uniform sampling"""

    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity < 1:
            raise ConfigError("replay capacity must be at least 1")
        self.capacity = capacity
        self.rng = rng
        self._ring: RingCache[Transition] = RingCache(max_size=capacity)

    def add(self, transition: Transition):
        self._ring.append(transition)

    def sample(self, batch_size: int) -> list[Transition]:
        """Uniform draw with replacement"""
        if not len(self._ring):
            raise UsageError("cannot sample from an empty replay buffer")
        picks = self.rng.integers(0, len(self._ring), size=batch_size)
        return [self._ring[int(i)] for i in picks]

    def __len__(self) -> int:
        return len(self._ring)

    def __iter__(self):
        return iter(self._ring)


def store_perturbed(
    buffers: Sequence[ReplayBuffer], transition: Transition, sigma: float, rng: np.random.Generator, kind: str
) -> list[float]:
    """
    Append a transition with Gaussian reward noise W ~ N(0, sigma^2).

    An ensemble keeps one buffer per particle and draws independent noise for
    each; every other network kind writes one buffer with one draw. The true
    reward stays on the transition for bookkeeping.

    Returns:
        The noise draws, one per buffer written
    """
    if sigma < 0:
        raise ConfigError("sigma must be non-negative")
    targets = buffers if kind == ENSEMBLE else buffers[:1]
    noises = rng.normal(0.0, sigma, size=len(targets)) if sigma > 0 else np.zeros(len(targets))
    for buffer, noise in zip(targets, noises):
        buffer.add(transition.with_noise(noise))
    return [float(n) for n in noises]


@dataclass
class Batch:
    """Stacked network inputs for a batch of transitions"""

    inputs: np.ndarray
    rewards: np.ndarray
    next_inputs: np.ndarray
    next_mask: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]


def stack_batch(transitions: Sequence[Transition], action_table: dict[int, np.ndarray]) -> Batch:
    """
    Build [rows, d] current inputs and [rows, n_actions, d] next inputs, one
    next input per non-idle action with a mask over the allowed ones.
    """
    if not transitions:
        raise UsageError("empty batch")
    actions = sorted(action_table)
    inputs = np.stack(
        [np.concatenate([t.user_features, t.action_features, t.interact_features]) for t in transitions]
    )
    next_inputs = np.stack(
        [
            np.stack([np.concatenate([t.user_features, action_table[a], t.next_interact_features]) for a in actions])
            for t in transitions
        ]
    )
    mask = np.array([[a in t.next_actions for a in actions] for t in transitions], dtype=bool)
    rewards = np.array([t.reward for t in transitions], dtype=np.float64)
    return Batch(inputs=inputs, rewards=rewards, next_inputs=next_inputs, next_mask=mask)
