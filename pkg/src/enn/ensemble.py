"""
Deep ensemble with additive, permanently frozen prior networks.

Sample z is the value f_{beta_z}(x) + prior_scale * f_{prior_z}(x). Only the
base networks are trainable; the prior checksum is taken at construction and
checked on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from src.core.errors import ConfigError, NumericError, ShapeError, UsageError
from src.core.rng import array_checksum
from src.enn.index import ENSEMBLE, EpistemicIndex, IndexSpec
from src.nncore.dense import DenseNetParams, GradientSet, backward, forward, glorot_init


@dataclass
class EnsembleParams:
    """M trainable base networks paired with M frozen prior networks"""

    base: list[DenseNetParams]
    priors: list[DenseNetParams]
    prior_scale: float
    prior_checksum: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.base or len(self.base) != len(self.priors):
            raise ConfigError("an ensemble needs M >= 1 base networks and as many priors")
        for b, p in zip(self.base, self.priors):
            if b.input_size != p.input_size or b.output_size != p.output_size or b.output_size != 1:
                raise ShapeError("base and prior networks must share input width and a scalar output")
        if not self.prior_checksum:
            self.prior_checksum = self.current_prior_checksum()

    @property
    def kind(self) -> str:
        return ENSEMBLE

    @property
    def size(self) -> int:
        return len(self.base)

    @property
    def input_size(self) -> int:
        return self.base[0].input_size

    @property
    def index_spec(self) -> IndexSpec:
        return IndexSpec(ENSEMBLE, self.size)

    def trainable_arrays(self) -> list[np.ndarray]:
        arrays = []
        for net in self.base:
            arrays.extend(net.arrays())
        return arrays

    def with_trainable(self, arrays: Sequence[np.ndarray]) -> "EnsembleParams":
        per_net = len(self.base[0].arrays())
        if len(arrays) != per_net * self.size:
            raise ShapeError("trainable arrays do not match the ensemble layout")
        base = [net.with_arrays(arrays[k * per_net:(k + 1) * per_net]) for k, net in enumerate(self.base)]
        return EnsembleParams(base, self.priors, self.prior_scale, self.prior_checksum)

    def snapshot(self) -> "EnsembleParams":
        """Copy of the trainable part; priors are shared, never copied"""
        return self.with_trainable([a.copy() for a in self.trainable_arrays()])

    def checksum(self) -> str:
        return array_checksum(self.trainable_arrays())

    def current_prior_checksum(self) -> str:
        arrays = []
        for net in self.priors:
            arrays.extend(net.arrays())
        return array_checksum(arrays)

    def verify_priors(self):
        if self.current_prior_checksum() != self.prior_checksum:
            raise NumericError("ensemble prior networks changed after construction")


def init_ensemble(
    layer_sizes: Sequence[int], size: int, prior_scale: float, rng: np.random.Generator
) -> EnsembleParams:
    """
    Glorot-initialize M base networks and M prior networks of the same architecture.

    Args:
        layer_sizes: Input width, hidden widths, 1
        size: Number of particles M
        prior_scale: Additive prior weight (alpha)
        rng: Seeded generator
    """
    if size < 1:
        raise ConfigError("ensemble size must be at least 1")
    if not 0.0 <= prior_scale < 1.0:
        raise ConfigError("prior_scale must lie in [0, 1)")
    base = [glorot_init(layer_sizes, rng) for _ in range(size)]
    priors = [glorot_init(layer_sizes, rng) for _ in range(size)]
    return EnsembleParams(base, priors, float(prior_scale))


def _particle(params: EnsembleParams, z) -> int:
    if isinstance(z, EpistemicIndex):
        if z.particle is None:
            raise UsageError("ensemble networks take a particle index, got an index vector")
        z = z.particle
    if isinstance(z, (int, np.integer)) and 1 <= int(z) <= params.size:
        return int(z)
    raise UsageError(f"particle index must lie in 1..{params.size}, got {z!r}")


def ensemble_forward(params: EnsembleParams, x: np.ndarray, z) -> np.ndarray:
    """Sample-z value for one input (scalar array) or a batch of rows ([rows])"""
    k = _particle(params, z) - 1
    base_out, _ = forward(params.base[k], x)
    prior_out, _ = forward(params.priors[k], x)
    return base_out[..., 0] + params.prior_scale * prior_out[..., 0]


def ensemble_grad(params: EnsembleParams, x: np.ndarray, z, upstream) -> GradientSet:
    """
    Gradient of sum(upstream * h(x, z)) over every base network's arrays.

    Only particle z's block is non-zero; priors receive nothing.
    """
    k = _particle(params, z) - 1
    out, cache = forward(params.base[k], x)
    up = np.broadcast_to(np.asarray(upstream, dtype=np.float64), out.shape[:-1])[..., None]
    block = backward(params.base[k], cache, up)
    per_net = len(block.arrays)
    arrays = [np.zeros_like(a) for a in params.trainable_arrays()]
    arrays[k * per_net:(k + 1) * per_net] = block.arrays
    return GradientSet(arrays)
