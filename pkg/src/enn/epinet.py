"""
EpiNet add-on for a scalar value network.

    h(x, z) = f_beta(x) + (g_eta(sg[sigma(x)], z) + prior_scale * g_prior(sg[sigma(x)], z)) . z

sigma(x) is the trunk's last hidden representation. The heads see it through
a stop-gradient: the trunk is trained only through its own output f_beta(x).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.core.errors import ConfigError, ShapeError, UsageError, NumericError
from src.core.rng import array_checksum
from src.enn.index import EPINET, EpistemicIndex, IndexSpec
from src.nncore.dense import DenseNetParams, GradientSet, backward, forward, glorot_init, last_hidden


DEFAULT_HEAD_WIDTH = 16


@dataclass
class EpiNetParams:
    """Trainable trunk and learnable head, plus a frozen prior head"""

    base: DenseNetParams
    head: DenseNetParams
    prior_head: DenseNetParams
    prior_scale: float
    index_dim: int
    prior_checksum: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.base.weights) < 2 or self.base.output_size != 1:
            raise ConfigError("the EpiNet trunk needs at least one hidden layer and a scalar output")
        head_in = self.base.layer_sizes[-2] + self.index_dim
        for net in (self.head, self.prior_head):
            if net.input_size != head_in or net.output_size != self.index_dim:
                raise ShapeError(
                    f"EpiNet heads must map {head_in} -> {self.index_dim}, got {net.input_size} -> {net.output_size}"
                )
        if not self.prior_checksum:
            self.prior_checksum = self.current_prior_checksum()

    @property
    def kind(self) -> str:
        return EPINET

    @property
    def input_size(self) -> int:
        return self.base.input_size

    @property
    def representation_size(self) -> int:
        return self.base.layer_sizes[-2]

    @property
    def index_spec(self) -> IndexSpec:
        return IndexSpec(EPINET, self.index_dim)

    def trainable_arrays(self) -> list[np.ndarray]:
        return self.base.arrays() + self.head.arrays()

    def with_trainable(self, arrays: Sequence[np.ndarray]) -> "EpiNetParams":
        n_base = len(self.base.arrays())
        if len(arrays) != n_base + len(self.head.arrays()):
            raise ShapeError("trainable arrays do not match the EpiNet layout")
        return EpiNetParams(
            self.base.with_arrays(arrays[:n_base]),
            self.head.with_arrays(arrays[n_base:]),
            self.prior_head,
            self.prior_scale,
            self.index_dim,
            self.prior_checksum,
        )

    def snapshot(self) -> "EpiNetParams":
        return self.with_trainable([a.copy() for a in self.trainable_arrays()])

    def checksum(self) -> str:
        return array_checksum(self.trainable_arrays())

    def current_prior_checksum(self) -> str:
        return self.prior_head.checksum()

    def verify_priors(self):
        if self.current_prior_checksum() != self.prior_checksum:
            raise NumericError("EpiNet prior head changed after construction")


def init_epinet(
    layer_sizes: Sequence[int],
    index_dim: int,
    prior_scale: float,
    rng: np.random.Generator,
    head_width: int = DEFAULT_HEAD_WIDTH,
) -> EpiNetParams:
    """
    Glorot-initialize the trunk and both heads.

    Args:
        layer_sizes: Trunk sizes: input width, hidden widths (at least one), 1
        index_dim: d_z
        prior_scale: Weight of the prior head (alpha)
        rng: Seeded generator
        head_width: Hidden width of the two-layer heads
    """
    if index_dim < 1:
        raise ConfigError("index dimension must be at least 1")
    if not 0.0 <= prior_scale < 1.0:
        raise ConfigError("prior_scale must lie in [0, 1)")
    base = glorot_init(layer_sizes, rng)
    if len(base.weights) < 2:
        raise ConfigError("the EpiNet trunk needs at least one hidden layer")
    head_sizes = [base.layer_sizes[-2] + index_dim, head_width, index_dim]
    head = glorot_init(head_sizes, rng)
    prior_head = glorot_init(head_sizes, rng)
    return EpiNetParams(base, head, prior_head, float(prior_scale), int(index_dim))


def _index_rows(params: EpiNetParams, z, rows: int) -> np.ndarray:
    if isinstance(z, EpistemicIndex):
        if z.vector is None:
            raise UsageError("EpiNet networks take an index vector, got a particle id")
        z = z.vector
    if isinstance(z, (int, np.integer)):
        raise UsageError("EpiNet networks take an index vector, got a particle id")
    z = np.asarray(z, dtype=np.float64)
    if z.shape == (params.index_dim,):
        return np.broadcast_to(z, (rows, params.index_dim))
    if z.shape == (rows, params.index_dim):
        return z
    raise ShapeError(f"index must have shape ({params.index_dim},) or ({rows}, {params.index_dim}), got {z.shape}")


def _epinet_pass(params: EpiNetParams, x: np.ndarray, z, sigma_override: Optional[np.ndarray] = None):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows_x = x[None, :] if single else x
    f, trunk_cache = forward(params.base, rows_x)
    sigma = last_hidden(trunk_cache) if sigma_override is None else np.atleast_2d(sigma_override)
    zrows = _index_rows(params, z, rows_x.shape[0])
    head_in = np.concatenate([sigma, zrows], axis=1)
    g, head_cache = forward(params.head, head_in)
    g_prior, _ = forward(params.prior_head, head_in)
    y = f[:, 0] + np.sum((g + params.prior_scale * g_prior) * zrows, axis=1)
    return y, single, trunk_cache, head_cache, zrows


def epinet_forward(params: EpiNetParams, x: np.ndarray, z, sigma_override: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Value for one input (0-d array) or each row of a batch.

    Args:
        params: EpiNet parameters
        x: Input vector or batch
        z: Index vector [d_z], or one index per row [rows, d_z]
        sigma_override: Evaluate both heads at this representation instead of sigma(x)
    """
    y, single, *_ = _epinet_pass(params, x, z, sigma_override)
    return y[0] if single else y


def epinet_grad(params: EpiNetParams, x: np.ndarray, z, upstream) -> GradientSet:
    """
    Gradient of sum(upstream * h(x, z)) over trunk and learnable head.

    The heads' input representation is a stop-gradient: no gradient reaches the
    trunk through it. The trunk still learns through f_beta(x).
    """
    y, _, trunk_cache, head_cache, zrows = _epinet_pass(params, x, z)
    up = np.broadcast_to(np.asarray(upstream, dtype=np.float64), y.shape)
    trunk = backward(params.base, trunk_cache, up[:, None])
    head = backward(params.head, head_cache, up[:, None] * zrows)
    return GradientSet(trunk.arrays + head.arrays)
