"""
Default hyperparameters and merging of experiment files over them.
"""

from __future__ import annotations

import copy
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Mapping, Optional

from src.core.errors import ConfigError


logger = logging.getLogger(__name__)


DEFAULT_AGENT = {
    'epsilon_start': 1.0,
    'epsilon_end': 0.05,
    'epsilon_decay_fraction': 0.5,
    'epsilon_decay_steps': None,
    'sigma': 0.1,
    'target_period': 100,
    'batch_size': 64,
    'warmup': 200,
    'train_every': 1,
    'updates_per_step': 1,
    'capacity': 100_000,
    'ucb_scale': 1.0,
    'ts_scale': 1.0,
    'ridge': 1.0,
    'optimizer': 'adam',
    'learning_rate': 1e-3,
    'prior_scale': 0.3,
    'ensemble_size': 10,
    'index_dim': 10,
    'train_indices': 50,
    'head_width': 16,
}

DEFAULT_NETWORK = {
    'hidden': [20],
}

DEFAULT_ENVIRONMENT = {
    'kind': 'seqrec',
    'target': 10.0,
    'budget': 10,
    'window': 110,
    'users': None,
    'spawn': None,
    'eval_users': None,
    'eval_spawn': None,
}

DEFAULT_EXPERIMENT = {
    'name': 'experiment',
    'seeds': list(range(10)),
    'life_cycles': 100,
    'workers': 1,
    'write_transitions': False,
    'write_decisions': False,
    'write_checkpoints': False,
}


def merge_section(defaults: Mapping[str, Any], given: Optional[Mapping[str, Any]], section: str) -> dict[str, Any]:
    """
    Overlay a user table on a defaults table.

    Unknown keys are ignored with a warning.

    Args:
        defaults: Known keys and their default values
        given: Table read from the experiment file (may be None)
        section: Name used in warnings

    Returns:
        A new dict with every default key present
    """
    merged = copy.deepcopy(dict(defaults))
    for key, value in (given or {}).items():
        if key not in defaults:
            logger.warning("Ignoring unknown key %r in [%s]", key, section)
            continue
        merged[key] = value
    return merged


class SettingsManager:
    """Reads an experiment file and exposes each section merged over the defaults"""

    DEFAULT_SETTINGS = {
        'experiment': DEFAULT_EXPERIMENT,
        'environment': DEFAULT_ENVIRONMENT,
        'agent_defaults': {**DEFAULT_AGENT, **DEFAULT_NETWORK},
    }

    def __init__(self, settings_file=None, defaults_file=None):
        """
        Initialize settings manager.

        Args:
            settings_file: Experiment TOML file; None gives the built-in defaults
            defaults_file: Optional TOML whose [agent_defaults] table overrides the
                built-in hyperparameters; unreadable files are skipped with a warning
        """
        self.settings_file = settings_file
        self.raw: dict[str, Any] = {}
        self.base_agent = dict(self.DEFAULT_SETTINGS['agent_defaults'])
        if defaults_file is not None:
            self.load_defaults(defaults_file)
        if settings_file is not None:
            self.load()

    def load_defaults(self, defaults_file):
        """Overlay site-wide agent defaults; fall back to the built-ins on failure"""
        try:
            with open(defaults_file, 'rb') as f:
                table = tomllib.load(f)
            self.base_agent = merge_section(self.base_agent, table.get('agent_defaults'), 'agent_defaults')
        except (OSError, tomllib.TOMLDecodeError) as exc:
            logger.warning("Failed to load defaults from %s: %s", defaults_file, exc)
            self.base_agent = dict(self.DEFAULT_SETTINGS['agent_defaults'])

    def load(self):
        """Read the experiment file; it is required, so failures raise ConfigError"""
        path = Path(self.settings_file)
        try:
            with open(path, 'rb') as f:
                self.raw = tomllib.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        for key in self.raw:
            if key not in ('experiment', 'environment', 'agent_defaults', 'agents'):
                logger.warning("Ignoring unknown table [%s] in %s", key, path)

    def section(self, name: str) -> dict[str, Any]:
        if name == 'agent_defaults':
            return merge_section(self.base_agent, self.raw.get(name), name)
        return merge_section(self.DEFAULT_SETTINGS[name], self.raw.get(name), name)

    def agents(self) -> list[dict[str, Any]]:
        """Each [[agents]] entry merged over the agent defaults"""
        base = self.section('agent_defaults')
        known = {**base, 'name': None, 'kind': None}
        out = []
        for k, entry in enumerate(self.raw.get('agents', [])):
            merged = merge_section(known, entry, f"agents.{k}")
            out.append(merged)
        return out
