"""
Tabular agents for the single-user and multi-user SeqRec case studies.

The user is satisfied only by a life-cycle of T identical picks of its
preferred action; every other life-cycle pays nothing. These agents need no
networks, so the sample-complexity arguments can be checked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from src.core.errors import ConfigError
from src.envs.features import A1, A2


ARMS = (A1, A2)


def _other(action: int) -> int:
    return A2 if action == A1 else A1


@dataclass(frozen=True)
class TwoHypothesisPosterior:
    """Probability that a1 (rather than a2) is the satisfying action"""

    p_a1: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p_a1 <= 1.0:
            raise ConfigError("p_a1 must lie in [0, 1]")

    def prob(self, action: int) -> float:
        return self.p_a1 if action == A1 else 1.0 - self.p_a1

    @property
    def identified(self) -> bool:
        return self.p_a1 in (0.0, 1.0)

    def refute(self, action: int) -> "TwoHypothesisPosterior":
        return TwoHypothesisPosterior(0.0 if action == A1 else 1.0)

    def confirm(self, action: int) -> "TwoHypothesisPosterior":
        return TwoHypothesisPosterior(1.0 if action == A1 else 0.0)


@dataclass(frozen=True)
class DEEpisode:
    action: int
    rewarded: bool
    posterior: TwoHypothesisPosterior


def tabular_de_episode(
    posterior: TwoHypothesisPosterior, truth: int, T: int, rng: np.random.Generator
) -> DEEpisode:
    """
    Sample a hypothesis from the posterior and play its action for the whole
    life-cycle. A reward collapses the posterior onto that action; no reward
    refutes it.
    """
    if T < 1:
        raise ConfigError("T must be at least 1")
    action = A1 if rng.random() < posterior.p_a1 else A2
    rewarded = action == truth
    updated = posterior.confirm(action) if rewarded else posterior.refute(action)
    return DEEpisode(action, rewarded, updated)


def de_lifecycles_to_success(truth: int, T: int, rng: np.random.Generator, refute: bool = True) -> int:
    """
    Life-cycles up to and including the first reward.

    With refute=False each life-cycle is a fresh draw from the 1/2 prior, the
    counting that gives a geometric mean of 2; with refutation the mean is 1.5.
    """
    posterior = TwoHypothesisPosterior()
    count = 0
    while True:
        count += 1
        episode = tabular_de_episode(posterior, truth, T, rng)
        if episode.rewarded:
            return count
        posterior = episode.posterior if refute else TwoHypothesisPosterior()


def tabular_random_episode(T: int, rng: np.random.Generator, truth: int = A2) -> bool:
    """One life-cycle of uniform picks; succeeds iff all T picks are the satisfying action"""
    if T < 1:
        raise ConfigError("T must be at least 1")
    picks = np.where(rng.random(T) < 0.5, A1, A2)
    return bool(np.all(picks == truth))


@dataclass
class GaussianArms:
    """Independent N(mean, 1/precision) reward beliefs per arm, unit observation noise"""

    mean: dict[int, float] = field(default_factory=lambda: {a: 0.0 for a in ARMS})
    precision: dict[int, float] = field(default_factory=lambda: {a: 1.0 for a in ARMS})

    def update(self, arm: int, reward: float):
        prec = self.precision[arm] + 1.0
        self.mean[arm] = (self.precision[arm] * self.mean[arm] + reward) / prec
        self.precision[arm] = prec


@dataclass
class Trajectory:
    actions: list[int]
    rewards: list[float]

    @property
    def total(self) -> float:
        return float(sum(self.rewards))


def _lifecycle_rewards(actions: list[int], truth: int) -> list[float]:
    rewards = [0.0] * len(actions)
    if all(a == truth for a in actions):
        rewards[-1] = 1.0
    return rewards


def tabular_ts_episode(arms: GaussianArms, T: int, rng, truth: int = A2) -> Trajectory:
    """
    Myopic Thompson sampling over the two arms for one life-cycle.

    Each step draws eps = rng.standard_normal(2), samples one belief per arm
    and plays the argmax. The belief of the played arm is updated with the
    reward observed at that step; beliefs persist across life-cycles.
    """
    if T < 1:
        raise ConfigError("T must be at least 1")
    actions, rewards = [], []
    for step in range(T):
        eps = rng.standard_normal(2)
        samples = [arms.mean[a] + eps[k] / np.sqrt(arms.precision[a]) for k, a in enumerate(ARMS)]
        action = ARMS[int(np.argmax(samples))]
        actions.append(action)
        success = step == T - 1 and all(a == truth for a in actions)
        reward = 1.0 if success else 0.0
        rewards.append(reward)
        arms.update(action, reward)
    return Trajectory(actions, rewards)


@dataclass
class TabularArmStats:
    """Pull counts, reward sums and the global step counter t"""

    counts: dict[int, int] = field(default_factory=lambda: {a: 0 for a in ARMS})
    sums: dict[int, float] = field(default_factory=lambda: {a: 0.0 for a in ARMS})
    t: int = 0

    def score(self, arm: int) -> float:
        n = self.counts[arm]
        if n == 0:
            return np.inf
        return self.sums[arm] / n + np.sqrt(np.log(self.t) / n)


def tabular_ucb_episode(stats: TabularArmStats, T: int, truth: int = A2) -> Trajectory:
    """
    UCB with bonus sqrt(log t / N(a)); unpulled arms are infinitely
    optimistic, ties go to a1, and the statistics persist across life-cycles.
    """
    if T < 1:
        raise ConfigError("T must be at least 1")
    actions, rewards = [], []
    for step in range(T):
        stats.t += 1
        action = max(ARMS, key=lambda a: (stats.score(a), -a))
        actions.append(action)
        success = step == T - 1 and all(a == truth for a in actions)
        reward = 1.0 if success else 0.0
        rewards.append(reward)
        stats.counts[action] += 1
        stats.sums[action] += reward
    return Trajectory(actions, rewards)


def lifecycles_to_first_success(run_lifecycle: Callable[[], bool], limit: int = 1_000_000) -> int:
    for count in range(1, limit + 1):
        if run_lifecycle():
            return count
    raise ConfigError(f"no success within {limit} life-cycles")


def alternation_violations(actions: list[int]) -> int:
    """Number of consecutive repeats of the same action"""
    return sum(1 for a, b in zip(actions, actions[1:]) if a == b)


@dataclass
class SweepResult:
    """Per-round reward totals and how many users were known after each round"""

    rewards: list[float]
    known: list[int]

    @property
    def curve(self) -> np.ndarray:
        return np.cumsum(self.rewards)

    @property
    def total(self) -> float:
        return float(sum(self.rewards))


def _preferences(n_users: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.array([A1] * (n_users // 2) + [A2] * (n_users - n_users // 2))
    return labels[rng.permutation(n_users)]


def multiuser_de_sweep(n_users: int, T: int, rounds: int, rng: np.random.Generator) -> SweepResult:
    """
    Every user runs tabular DE each round. A user's preference is known once a
    life-cycle is rewarded or refuted. After a round in which at least half
    the users are known, a generalizer labels every remaining user correctly.
    """
    if n_users < 2 or n_users % 2:
        raise ConfigError("the multi-user sweep needs an even number of users")
    if rounds < 1:
        raise ConfigError("rounds must be at least 1")
    truth = _preferences(n_users, rng)
    posteriors = [TwoHypothesisPosterior() for _ in range(n_users)]
    generalized = False
    rewards, known = [], []
    for _ in range(rounds):
        total = 0.0
        for u in range(n_users):
            if generalized:
                posteriors[u] = TwoHypothesisPosterior().confirm(int(truth[u]))
            episode = tabular_de_episode(posteriors[u], int(truth[u]), T, rng)
            posteriors[u] = episode.posterior
            total += 1.0 if episode.rewarded else 0.0
        n_known = sum(p.identified for p in posteriors)
        if n_known >= n_users // 2:
            generalized = True
            n_known = n_users
        rewards.append(total)
        known.append(n_known)
    return SweepResult(rewards, known)


def multiuser_random_sweep(n_users: int, T: int, rounds: int, rng: np.random.Generator) -> SweepResult:
    truth = _preferences(n_users, rng)
    rewards = []
    for _ in range(rounds):
        rewards.append(float(sum(tabular_random_episode(T, rng, int(truth[u])) for u in range(n_users))))
    return SweepResult(rewards, [0] * rounds)
