"""
Typed experiment configuration.

Raw tables from SettingsManager become frozen dataclasses here; every check
runs before a single environment step is taken.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from src.config.settings import DEFAULT_AGENT, DEFAULT_ENVIRONMENT, DEFAULT_EXPERIMENT, SettingsManager
from src.core.errors import ConfigError


AGENT_KINDS = (
    "random",
    "oracle",
    "egreedy",
    "greedy",
    "neural_ts",
    "neural_ucb",
    "neural_linucb",
    "ensemble_de",
    "epinet_de",
)
NEURAL_KINDS = AGENT_KINDS[2:]
BANDIT_KINDS = ("neural_ts", "neural_ucb", "neural_linucb")
RVF_KINDS = ("ensemble_de", "epinet_de")
ENV_KINDS = ("seqrec", "streak_toy")


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters of one agent; defaults follow DEFAULT_AGENT"""

    epsilon_start: float = DEFAULT_AGENT['epsilon_start']
    epsilon_end: float = DEFAULT_AGENT['epsilon_end']
    epsilon_decay_fraction: float = DEFAULT_AGENT['epsilon_decay_fraction']
    epsilon_decay_steps: Optional[int] = DEFAULT_AGENT['epsilon_decay_steps']
    sigma: float = DEFAULT_AGENT['sigma']
    target_period: int = DEFAULT_AGENT['target_period']
    batch_size: int = DEFAULT_AGENT['batch_size']
    warmup: int = DEFAULT_AGENT['warmup']
    train_every: int = DEFAULT_AGENT['train_every']
    updates_per_step: int = DEFAULT_AGENT['updates_per_step']
    capacity: int = DEFAULT_AGENT['capacity']
    ucb_scale: float = DEFAULT_AGENT['ucb_scale']
    ts_scale: float = DEFAULT_AGENT['ts_scale']
    ridge: float = DEFAULT_AGENT['ridge']
    optimizer: str = DEFAULT_AGENT['optimizer']
    learning_rate: float = DEFAULT_AGENT['learning_rate']
    prior_scale: float = DEFAULT_AGENT['prior_scale']
    ensemble_size: int = DEFAULT_AGENT['ensemble_size']
    index_dim: int = DEFAULT_AGENT['index_dim']
    train_indices: int = DEFAULT_AGENT['train_indices']
    head_width: int = DEFAULT_AGENT['head_width']

    def __post_init__(self):
        for name in ('epsilon_start', 'epsilon_end'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.epsilon_decay_fraction <= 1.0:
            raise ConfigError("epsilon_decay_fraction must lie in (0, 1]")
        if self.epsilon_decay_steps is not None and self.epsilon_decay_steps < 1:
            raise ConfigError("epsilon_decay_steps must be at least 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        for name in ('target_period', 'batch_size', 'train_every', 'updates_per_step', 'capacity',
                     'ensemble_size', 'index_dim', 'train_indices', 'head_width'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.warmup < 0:
            raise ConfigError("warmup must be non-negative")
        if min(self.ucb_scale, self.ts_scale) < 0:
            raise ConfigError("exploration scales must be non-negative")
        if not self.ridge > 0:
            raise ConfigError("ridge must be positive")
        if not 0.0 <= self.prior_scale < 1.0:
            raise ConfigError("prior_scale must lie in [0, 1)")
        if self.optimizer not in ('sgd', 'adam'):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")

    def exploration_off(self) -> "AgentConfig":
        """Same config with every exploration knob at zero"""
        return replace(self, epsilon_start=0.0, epsilon_end=0.0, ts_scale=0.0, ucb_scale=0.0)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class NetworkSpec:
    hidden: tuple[int, ...] = (20,)

    def __post_init__(self):
        if any(int(h) < 1 for h in self.hidden):
            raise ConfigError("hidden layer widths must be positive")


@dataclass(frozen=True)
class AgentSpec:
    name: str
    kind: str
    config: AgentConfig = field(default_factory=AgentConfig)
    network: NetworkSpec = field(default_factory=NetworkSpec)

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ConfigError(f"unknown agent kind {self.kind!r}; expected one of {', '.join(AGENT_KINDS)}")
        if not self.name:
            raise ConfigError("agents need a name")
        if self.kind == "epinet_de" and not self.network.hidden:
            raise ConfigError("the EpiNet trunk needs at least one hidden layer")


@dataclass(frozen=True)
class EnvSpec:
    """Environment kind plus either an explicit roster or spawn parameters"""

    kind: str = DEFAULT_ENVIRONMENT['kind']
    target: float = DEFAULT_ENVIRONMENT['target']
    budget: int = DEFAULT_ENVIRONMENT['budget']
    window: int = DEFAULT_ENVIRONMENT['window']
    users: Optional[tuple] = None
    spawn: Optional[int] = None
    eval_users: Optional[tuple] = None
    eval_spawn: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ConfigError(f"unknown environment kind {self.kind!r}")
        if self.budget < 1 or not self.target > 0 or self.window < 1:
            raise ConfigError("budget and window must be at least 1 and target positive")
        if self.users is not None and self.spawn is not None:
            raise ConfigError("give either environment.users or environment.spawn, not both")
        if self.spawn is not None and self.spawn < 1:
            raise ConfigError("environment.spawn must be at least 1")
        if self.eval_spawn is not None and self.eval_spawn < 1:
            raise ConfigError("environment.eval_spawn must be at least 1")
        if self.kind != "seqrec" and self.has_eval_roster:
            raise ConfigError("evaluation rosters are only defined for seqrec environments")

    @property
    def has_eval_roster(self) -> bool:
        return self.eval_users is not None or self.eval_spawn is not None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a sweep of agents over seeds"""

    name: str
    environment: EnvSpec
    agents: tuple[AgentSpec, ...]
    seeds: tuple[int, ...] = tuple(DEFAULT_EXPERIMENT['seeds'])
    life_cycles: int = DEFAULT_EXPERIMENT['life_cycles']
    workers: int = DEFAULT_EXPERIMENT['workers']
    write_transitions: bool = False
    write_decisions: bool = False
    write_checkpoints: bool = False

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not self.agents:
            raise ConfigError("at least one agent is required")
        names = [a.name for a in self.agents]
        if len(set(names)) != len(names):
            raise ConfigError("agent names must be distinct")
        if self.life_cycles < 1:
            raise ConfigError("life_cycles must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def agent(self, name: str) -> AgentSpec:
        for spec in self.agents:
            if spec.name == name:
                return spec
        raise ConfigError(f"no agent named {name!r} in {self.name}")


def _agent_spec(entry: dict[str, Any]) -> AgentSpec:
    entry = dict(entry)
    name, kind = entry.pop('name'), entry.pop('kind')
    hidden = entry.pop('hidden')
    if kind is None:
        raise ConfigError("every [[agents]] entry needs a kind")
    try:
        config = AgentConfig(**entry)
    except TypeError as exc:
        raise ConfigError(f"agent {name or kind}: {exc}") from exc
    return AgentSpec(name=name or kind, kind=kind, config=config, network=NetworkSpec(tuple(int(h) for h in hidden)))


def _env_spec(table: dict[str, Any]) -> EnvSpec:
    def roster(value):
        return tuple(dict(u) for u in value) if value is not None else None

    spawn = table.get('spawn')
    eval_spawn = table.get('eval_spawn')
    return EnvSpec(
        kind=table['kind'],
        target=float(table['target']),
        budget=int(table['budget']),
        window=int(table['window']),
        users=roster(table.get('users')),
        spawn=int(spawn) if spawn is not None else None,
        eval_users=roster(table.get('eval_users')),
        eval_spawn=int(eval_spawn) if eval_spawn is not None else None,
    )


def config_from_settings(settings: SettingsManager) -> ExperimentConfig:
    experiment = settings.section('experiment')
    agents = settings.agents()
    if not agents:
        raise ConfigError("the config lists no [[agents]]")
    return ExperimentConfig(
        name=str(experiment['name']),
        environment=_env_spec(settings.section('environment')),
        agents=tuple(_agent_spec(a) for a in agents),
        seeds=tuple(int(s) for s in experiment['seeds']),
        life_cycles=int(experiment['life_cycles']),
        workers=int(experiment['workers']),
        write_transitions=bool(experiment['write_transitions']),
        write_decisions=bool(experiment['write_decisions']),
        write_checkpoints=bool(experiment['write_checkpoints']),
    )


def load_experiment_config(path: Path | str, defaults_file=None) -> ExperimentConfig:
    """
    Read and validate an experiment TOML file.

    Args:
        path: Experiment file
        defaults_file: Optional site-wide agent defaults

    Returns:
        Validated ExperimentConfig; raises ConfigError otherwise
    """
    return config_from_settings(SettingsManager(path, defaults_file))


def _get_default_config() -> ExperimentConfig:
    """Toy SeqRec, one user, Ensemble-DE, ten seeds of 100 life-cycles"""
    return ExperimentConfig(
        name="toy_seqrec",
        environment=EnvSpec(),
        agents=(AgentSpec(name="ensemble-de", kind="ensemble_de"),),
    )
