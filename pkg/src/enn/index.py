"""
Epistemic indices: the random input that selects one posterior sample
from an epistemic neural network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.errors import ConfigError, UsageError
from src.core.rng import short_digest


ENSEMBLE = "ensemble"
EPINET = "epinet"


@dataclass(frozen=True, eq=False)
class EpistemicIndex:
    """A particle id in {1..M} (ensemble) or a real vector of length d_z (epinet)"""

    particle: Optional[int] = None
    vector: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.particle is None) == (self.vector is None):
            raise UsageError("an epistemic index holds exactly one of particle or vector")
        if self.particle is not None and self.particle < 1:
            raise UsageError(f"particle ids start at 1, got {self.particle}")
        if self.vector is not None and not np.all(np.isfinite(self.vector)):
            raise UsageError("epistemic index vector must be finite")

    @property
    def kind(self) -> str:
        return ENSEMBLE if self.particle is not None else EPINET

    def digest(self) -> str:
        return short_digest(self.particle if self.particle is not None else self.vector)


@dataclass(frozen=True)
class IndexSpec:
    """Shape of the index distribution P_z for one network"""

    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in (ENSEMBLE, EPINET):
            raise ConfigError(f"unknown index kind {self.kind!r}")
        if self.size < 1:
            raise ConfigError("ensemble size and index dimension must be at least 1")


def sample_index(spec: IndexSpec, rng: np.random.Generator) -> EpistemicIndex:
    """
    Draw z ~ P_z.

    Args:
        spec: ensemble of M particles (uniform id) or epinet of dimension d_z (standard normal)
        rng: Seeded generator

    Returns:
        A fresh EpistemicIndex
    """
    if spec.kind == ENSEMBLE:
        return EpistemicIndex(particle=int(rng.integers(1, spec.size + 1)))
    return EpistemicIndex(vector=rng.standard_normal(spec.size))
