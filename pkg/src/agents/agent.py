"""
Agents that act in an Environment and learn from its transitions.

Random and oracle agents are reference policies. DQNAgent covers the Q-learning
baselines with myopic exploration (epsilon-greedy, greedy, Neural TS, Neural
UCB, Neural LinUCB). RVFAgent is the deep-exploration agent: it samples one
epistemic index per user life-cycle and acts greedily on that sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Collection, Optional, Sequence

import numpy as np

from src.agents.last_layer import LastLayerStats
from src.agents.replay import ReplayBuffer, Transition, stack_batch, store_perturbed
from src.agents.selection import (
    epsilon_greedy_select,
    neural_linucb_select,
    neural_ts_select,
    neural_ucb_select,
    q_values,
    rvf_select,
)
from src.agents.td import sync_target, td_update, tile_indices
from src.config.experiment_config import BANDIT_KINDS, RVF_KINDS, AgentConfig, AgentSpec, NetworkSpec
from src.core.checkpoint import Checkpoint
from src.core.errors import ConfigError, UsageError
from src.core.rng import component_rng
from src.enn.ensemble import init_ensemble
from src.enn.epinet import init_epinet
from src.enn.index import ENSEMBLE, EpistemicIndex, IndexSpec, sample_index
from src.enn.network import (
    ValueNetwork,
    feature_size,
    init_plain,
    last_layer_features,
    network_from_checkpoint,
    network_to_checkpoint,
)
from src.envs.base import Environment
from src.envs.features import concat_input
from src.nncore.optim import OptimizerState


logger = logging.getLogger(__name__)

LOSS_LOG_EVERY = 100


@dataclass(frozen=True)
class IndexLogEntry:
    """The index a user acted under at time t, and whether it was drawn at that step"""

    t: int
    user: int
    digest: str
    refreshed: bool


@dataclass(frozen=True)
class Decision:
    t: int
    user: int
    digest: str
    action: int
    values: tuple[tuple[int, float], ...]


def lifecycle_index_refresh(
    user: int,
    allowed: Collection[int],
    indices: dict[int, EpistemicIndex],
    spec: IndexSpec,
    rng: np.random.Generator,
    noop: Optional[int],
    boundary: bool = False,
) -> tuple[EpistemicIndex, bool]:
    """
    Draw a fresh z_u for new users, when the user may only take the no-op, or
    at an explicit life-cycle boundary; otherwise keep the current one.

    Returns:
        (index to act under, whether it was just drawn)
    """
    idle = noop is not None and set(allowed) == {noop}
    if user not in indices or idle or boundary:
        indices[user] = sample_index(spec, rng)
        return indices[user], True
    return indices[user], False


def commitment_violations(log: Sequence[IndexLogEntry]) -> list[IndexLogEntry]:
    """Entries where a user's index changed without being redrawn at that step"""
    last: dict[int, str] = {}
    bad = []
    for entry in log:
        if entry.user in last and entry.digest != last[entry.user] and not entry.refreshed:
            bad.append(entry)
        last[entry.user] = entry.digest
    return bad


def build_network(kind: str, layer_sizes: Sequence[int], config: AgentConfig, rng: np.random.Generator) -> ValueNetwork:
    if kind == "ensemble_de":
        return init_ensemble(layer_sizes, config.ensemble_size, config.prior_scale, rng)
    if kind == "epinet_de":
        return init_epinet(layer_sizes, config.index_dim, config.prior_scale, rng, head_width=config.head_width)
    return init_plain(layer_sizes, rng)


class Agent:
    """Reference interface; subclasses override act/observe/train_step"""

    def __init__(self, name: str, kind: str, action_table: dict[int, np.ndarray], noop: Optional[int], seed: int):
        self.name = name
        self.kind = kind
        self.action_table = action_table
        self.noop = noop
        self.seed = seed
        self.frozen = False
        self.record_decisions = False
        self.decisions: list[Decision] = []
        self.index_log: list[IndexLogEntry] = []
        self.env_steps = 0

    def plan(self, total_steps: int):
        """Called once with an estimate of the run's environment steps"""

    def act(self, t: int, user: int, user_features, interact_features, allowed, boundary: bool = False) -> int:
        raise NotImplementedError

    def observe(self, user: int, transition: Transition):
        """Receive the transition produced by this agent's last action for the user"""

    def train_step(self) -> Optional[float]:
        self.env_steps += 1
        return None

    def freeze(self):
        """Evaluation mode: exploration knobs at zero, no storage, no updates"""
        self.frozen = True

    def checksum(self) -> str:
        return "-"

    def to_checkpoint(self) -> Checkpoint:
        raise UsageError(f"{self.kind} agents have no parameters to checkpoint")

    def _record(self, t, user, digest, action, values=()):
        if self.record_decisions:
            self.decisions.append(Decision(t, user, digest, action, tuple(values)))


class RandomAgent(Agent):
    """Uniform over the allowed actions"""

    def __init__(self, name, action_table, noop, seed):
        super().__init__(name, "random", action_table, noop, seed)
        self.rng = component_rng(seed, "agent", name, "explore")

    def act(self, t, user, user_features, interact_features, allowed, boundary=False) -> int:
        actions = sorted(allowed)
        action = actions[int(self.rng.integers(len(actions)))]
        self._record(t, user, "-", action)
        return action


class OracleAgent(Agent):
    """Plays the environment's full-knowledge policy"""

    def __init__(self, name, action_table, noop, seed, policy: Callable[[int], int]):
        super().__init__(name, "oracle", action_table, noop, seed)
        self.policy = policy

    def act(self, t, user, user_features, interact_features, allowed, boundary=False) -> int:
        action = self.policy(user)
        self._record(t, user, "-", action)
        return action


class NeuralAgent(Agent):
    """Shared Q-learning machinery: value network, target copy, replay and adam"""

    def __init__(
        self,
        name: str,
        kind: str,
        config: AgentConfig,
        network: NetworkSpec,
        input_size: int,
        action_table,
        noop,
        seed: int,
        net: Optional[ValueNetwork] = None,
    ):
        super().__init__(name, kind, action_table, noop, seed)
        self.config = config
        self.network = network
        self.input_size = input_size
        layer_sizes = [input_size, *network.hidden, 1]
        self.net = net if net is not None else build_network(kind, layer_sizes, config, component_rng(seed, "agent", name, "init"))
        self.target = self.net.snapshot()
        self.opt = OptimizerState(kind=config.optimizer, learning_rate=config.learning_rate)
        n_buffers = config.ensemble_size if self.net.kind == ENSEMBLE else 1
        self.buffers = [
            ReplayBuffer(config.capacity, component_rng(seed, "agent", name, "replay", str(k))) for k in range(n_buffers)
        ]
        self.explore_rng = component_rng(seed, "agent", name, "explore")
        self.stored = 0
        self.updates = 0
        self.last_loss: Optional[float] = None
        self.decay_steps = config.epsilon_decay_steps

    def plan(self, total_steps: int):
        if self.config.epsilon_decay_steps is None:
            self.decay_steps = max(1, int(self.config.epsilon_decay_fraction * total_steps))

    def freeze(self):
        super().freeze()
        self.config = self.config.exploration_off()

    def checksum(self) -> str:
        return self.net.checksum()

    def _terms(self):
        raise NotImplementedError

    def _store(self, transition: Transition):
        raise NotImplementedError

    def observe(self, user: int, transition: Transition):
        if self.frozen:
            return
        self._store(transition)
        self.stored += 1

    def train_step(self) -> Optional[float]:
        self.env_steps += 1
        cfg = self.config
        if self.frozen or self.stored < max(cfg.warmup, 1) or self.env_steps % cfg.train_every:
            return None
        for _ in range(cfg.updates_per_step):
            self.net, self.opt, self.last_loss = td_update(self.net, self.target, self._terms(), self.opt)
            self.updates += 1
            self.target = sync_target(self.target, self.net, self.updates, cfg.target_period)
            if self.updates % LOSS_LOG_EVERY == 0:
                logger.debug("%s update %d: TD loss %.6f", self.name, self.updates, self.last_loss)
        return self.last_loss

    def _batch(self, buffer: ReplayBuffer):
        return stack_batch(buffer.sample(self.config.batch_size), self.action_table)

    def _values(self, user_features, interact_features, allowed, z=None):
        actions = sorted(a for a in allowed if a != self.noop)
        if not self.record_decisions or not actions:
            return ()
        values = q_values(self.net, user_features, self.action_table, interact_features, actions, z)
        return tuple(zip(actions, (float(v) for v in values)))

    def checkpoint_meta(self) -> dict:
        return {
            "agent": {
                "name": self.name,
                "kind": self.kind,
                "config": self.config.to_dict(),
                "hidden": list(self.network.hidden),
                "input_size": self.input_size,
            },
            "updates": self.updates,
        }

    def to_checkpoint(self) -> Checkpoint:
        return network_to_checkpoint(self.net, self.checkpoint_meta())


class DQNAgent(NeuralAgent):
    """Q-learning with epsilon-greedy, greedy or last-layer bandit exploration"""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.stats: Optional[LastLayerStats] = None
        if self.kind in BANDIT_KINDS:
            self.stats = LastLayerStats(feature_size(self.net), self.config.ridge)

    @property
    def epsilon(self) -> float:
        if self.kind != "egreedy":
            return 0.0
        cfg = self.config
        progress = min(1.0, self.env_steps / self.decay_steps) if self.decay_steps else 1.0
        return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * progress

    def act(self, t, user, user_features, interact_features, allowed, boundary=False) -> int:
        table, cfg = self.action_table, self.config
        if self.kind == "neural_ts":
            action = neural_ts_select(
                self.net, self.stats, user_features, table, interact_features, allowed, cfg.ts_scale, self.explore_rng
            )
        elif self.kind == "neural_ucb":
            action = neural_ucb_select(self.net, self.stats, user_features, table, interact_features, allowed, cfg.ucb_scale)
        elif self.kind == "neural_linucb":
            action = neural_linucb_select(
                self.net, self.stats, user_features, table, interact_features, allowed, cfg.ucb_scale
            )
        else:
            action = epsilon_greedy_select(
                self.net, user_features, table, interact_features, allowed, self.epsilon, self.explore_rng
            )
        self._record(t, user, "-", action, self._values(user_features, interact_features, allowed))
        return action

    def _store(self, transition: Transition):
        self.buffers[0].add(transition)
        if self.stats is not None:
            x = concat_input(transition.user_features, transition.action_features, transition.interact_features)
            self.stats.update(last_layer_features(self.net, x), transition.true_reward)

    def _terms(self):
        return [(None, self._batch(self.buffers[0]))]

    def to_checkpoint(self) -> Checkpoint:
        ckpt = super().to_checkpoint()
        if self.stats is not None:
            ckpt.arrays.update(self.stats.arrays())
            ckpt.meta["stats_count"] = self.stats.count
        return ckpt


class RVFAgent(NeuralAgent):
    """Randomized value functions: one sampled value function per user life-cycle"""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.indices: dict[int, EpistemicIndex] = {}
        self.index_rng = component_rng(self.seed, "agent", self.name, "index")
        self.noise_rng = component_rng(self.seed, "agent", self.name, "noise")
        self.train_index_rng = component_rng(self.seed, "agent", self.name, "train-index")

    def act(self, t, user, user_features, interact_features, allowed, boundary=False) -> int:
        z, refreshed = lifecycle_index_refresh(
            user, allowed, self.indices, self.net.index_spec, self.index_rng, self.noop, boundary
        )
        digest = z.digest()
        self.index_log.append(IndexLogEntry(t, user, digest, refreshed))
        action = rvf_select(self.net, z, user_features, self.action_table, interact_features, allowed)
        self._record(t, user, digest, action, self._values(user_features, interact_features, allowed, z))
        return action

    def _store(self, transition: Transition):
        store_perturbed(self.buffers, transition, self.config.sigma, self.noise_rng, self.net.kind)

    def _terms(self):
        if self.net.kind == ENSEMBLE:
            return [(k + 1, self._batch(buffer)) for k, buffer in enumerate(self.buffers)]
        batch = self._batch(self.buffers[0])
        zs = self.train_index_rng.standard_normal((self.config.train_indices, self.config.index_dim))
        z_rows, tiled = tile_indices(batch, zs)
        return [(z_rows, tiled)]


def make_agent(spec: AgentSpec, env: Environment, seed: int) -> Agent:
    """
    Build the agent a spec names for a reset environment.

    Args:
        spec: Agent kind, hyperparameters and hidden sizes
        env: Environment the agent will act in (used for input widths and the oracle policy)
        seed: Run seed
    """
    table, noop = env.action_table(), env.noop
    if spec.kind == "random":
        return RandomAgent(spec.name, table, noop, seed)
    if spec.kind == "oracle":
        return OracleAgent(spec.name, table, noop, seed, env.oracle_action)
    cls = RVFAgent if spec.kind in RVF_KINDS else DQNAgent
    return cls(spec.name, spec.kind, spec.config, spec.network, env.input_size(), table, noop, seed)


def agent_from_checkpoint(ckpt: Checkpoint, env: Environment, seed: int) -> NeuralAgent:
    """Rebuild a frozen agent for evaluation"""
    info = ckpt.meta.get("agent")
    if not info:
        raise ConfigError("checkpoint carries no agent metadata")
    net = network_from_checkpoint(ckpt)
    config = AgentConfig(**info["config"])
    network = NetworkSpec(tuple(info["hidden"]))
    if env.input_size() != int(info["input_size"]):
        raise ConfigError(
            f"checkpoint expects inputs of width {info['input_size']}, the environment gives {env.input_size()}"
        )
    cls = RVFAgent if info["kind"] in RVF_KINDS else DQNAgent
    agent = cls(info["name"], info["kind"], config, network, int(info["input_size"]), env.action_table(), env.noop, seed, net=net)
    if isinstance(agent, DQNAgent) and agent.stats is not None and "stats.A" in ckpt.arrays:
        agent.stats = LastLayerStats.from_arrays(ckpt.arrays, config.ridge, int(ckpt.meta.get("stats_count", 0)))
    agent.updates = int(ckpt.meta.get("updates", 0))
    agent.freeze()
    return agent
