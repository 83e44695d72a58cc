"""
One value-function-with-index interface over every network the agents train.

A plain Q-network, a deep ensemble and an EpiNet all expose trainable arrays,
snapshots and checksums, and are evaluated through enn_forward/enn_grad.
The plain network ignores the index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from src.core.checkpoint import Checkpoint
from src.core.errors import ShapeError, UsageError, ValidationError
from src.core.rng import array_checksum
from src.enn.ensemble import EnsembleParams, ensemble_forward, ensemble_grad
from src.enn.epinet import EpiNetParams, epinet_forward, epinet_grad
from src.enn.index import ENSEMBLE, EPINET, EpistemicIndex, IndexSpec
from src.nncore.dense import (
    DenseNetParams,
    ForwardCache,
    GradientSet,
    backward,
    forward,
    glorot_init,
    last_hidden,
)


PLAIN = "plain"


@dataclass
class PlainValueNetwork:
    """A single dense Q-network behind the ENN interface"""

    base: DenseNetParams

    def __post_init__(self):
        if self.base.output_size != 1:
            raise ShapeError("value networks must have a scalar output")

    @property
    def kind(self) -> str:
        return PLAIN

    @property
    def input_size(self) -> int:
        return self.base.input_size

    @property
    def index_spec(self) -> Optional[IndexSpec]:
        return None

    def trainable_arrays(self) -> list[np.ndarray]:
        return self.base.arrays()

    def with_trainable(self, arrays: Sequence[np.ndarray]) -> "PlainValueNetwork":
        return PlainValueNetwork(self.base.with_arrays(arrays))

    def snapshot(self) -> "PlainValueNetwork":
        return PlainValueNetwork(self.base.copy())

    def checksum(self) -> str:
        return array_checksum(self.trainable_arrays())

    def verify_priors(self):
        pass


ValueNetwork = Union[PlainValueNetwork, EnsembleParams, EpiNetParams]


def init_plain(layer_sizes: Sequence[int], rng: np.random.Generator) -> PlainValueNetwork:
    return PlainValueNetwork(glorot_init(layer_sizes, rng))


def enn_forward(params: ValueNetwork, x: np.ndarray, z=None) -> np.ndarray:
    """
    Evaluate h(x, z).

    Args:
        params: Plain, ensemble or EpiNet parameters
        x: Input vector or batch of rows
        z: EpistemicIndex, particle id or index vector(s); must be None for plain networks

    Returns:
        0-d array for a vector input, [rows] for a batch
    """
    if isinstance(params, EnsembleParams):
        return ensemble_forward(params, x, z)
    if isinstance(params, EpiNetParams):
        return epinet_forward(params, x, z)
    if z is not None:
        raise UsageError("plain value networks take no epistemic index")
    out, _ = forward(params.base, x)
    return out[..., 0]


def enn_grad(params: ValueNetwork, x: np.ndarray, z, upstream) -> GradientSet:
    """Gradient of sum(upstream * h(x, z)) over the trainable arrays only"""
    if isinstance(params, EnsembleParams):
        return ensemble_grad(params, x, z, upstream)
    if isinstance(params, EpiNetParams):
        return epinet_grad(params, x, z, upstream)
    if z is not None:
        raise UsageError("plain value networks take no epistemic index")
    out, cache = forward(params.base, x)
    up = np.broadcast_to(np.asarray(upstream, dtype=np.float64), out.shape[:-1])[..., None]
    grads = backward(params.base, cache, up)
    return GradientSet(grads.arrays)


def _feature_trunk(params: ValueNetwork, z) -> DenseNetParams:
    if isinstance(params, PlainValueNetwork):
        return params.base
    if isinstance(params, EpiNetParams):
        return params.base
    particle = z.particle if isinstance(z, EpistemicIndex) else z
    if particle is None:
        raise UsageError("ensemble features need a particle index")
    return params.base[int(particle) - 1]


def last_layer_features(params: ValueNetwork, x: np.ndarray, z=None) -> np.ndarray:
    """Last hidden representation of the network that produces the value (rows for a batch)"""
    trunk = _feature_trunk(params, z)
    if len(trunk.weights) < 2:
        # no hidden layer: the representation is the input itself
        return np.asarray(x, dtype=np.float64)
    _, cache = forward(trunk, x)
    return last_hidden(cache)


def feature_size(params: ValueNetwork) -> int:
    trunk = params.base if not isinstance(params, EnsembleParams) else params.base[0]
    return trunk.layer_sizes[-2]


def _dense_arrays(prefix: str, net: DenseNetParams) -> dict[str, np.ndarray]:
    out = {}
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        out[f"{prefix}.W{k}"] = w
        out[f"{prefix}.b{k}"] = b
    return out


def _dense_from(prefix: str, arrays: dict[str, np.ndarray]) -> DenseNetParams:
    layers = []
    k = 0
    while f"{prefix}.W{k}" in arrays:
        layers.append((arrays[f"{prefix}.W{k}"], arrays[f"{prefix}.b{k}"]))
        k += 1
    if not layers:
        raise ValidationError(f"checkpoint has no arrays for {prefix!r}")
    return DenseNetParams.from_layers(layers)


def network_to_checkpoint(params: ValueNetwork, meta: Optional[dict] = None) -> Checkpoint:
    """Named arrays for every trainable and frozen part, with the layout in the header"""
    meta = dict(meta or {})
    arrays: dict[str, np.ndarray] = {}
    if isinstance(params, EnsembleParams):
        for k, (b, p) in enumerate(zip(params.base, params.priors)):
            arrays.update(_dense_arrays(f"base.{k}", b))
            arrays.update(_dense_arrays(f"prior.{k}", p))
        meta.update(prior_scale=params.prior_scale, size=params.size, prior_checksum=params.prior_checksum)
    elif isinstance(params, EpiNetParams):
        arrays.update(_dense_arrays("base", params.base))
        arrays.update(_dense_arrays("head", params.head))
        arrays.update(_dense_arrays("prior_head", params.prior_head))
        meta.update(
            prior_scale=params.prior_scale, index_dim=params.index_dim, prior_checksum=params.prior_checksum
        )
    else:
        arrays.update(_dense_arrays("base", params.base))
    return Checkpoint(kind=params.kind, arrays=arrays, meta=meta)


def network_from_checkpoint(ckpt: Checkpoint) -> ValueNetwork:
    """Rebuild a network; the stored prior checksum must match the stored priors"""
    arrays, meta = ckpt.arrays, ckpt.meta
    try:
        if ckpt.kind == ENSEMBLE:
            size = int(meta["size"])
            base = [_dense_from(f"base.{k}", arrays) for k in range(size)]
            priors = [_dense_from(f"prior.{k}", arrays) for k in range(size)]
            params = EnsembleParams(base, priors, float(meta["prior_scale"]))
        elif ckpt.kind == EPINET:
            params = EpiNetParams(
                _dense_from("base", arrays),
                _dense_from("head", arrays),
                _dense_from("prior_head", arrays),
                float(meta["prior_scale"]),
                int(meta["index_dim"]),
            )
        elif ckpt.kind == PLAIN:
            return PlainValueNetwork(_dense_from("base", arrays))
        else:
            raise ValidationError(f"unknown network kind {ckpt.kind!r} in checkpoint")
    except KeyError as exc:
        raise ValidationError(f"checkpoint metadata is missing {exc}") from exc
    if meta.get("prior_checksum") and meta["prior_checksum"] != params.prior_checksum:
        raise ValidationError("checkpoint prior arrays do not match their recorded checksum")
    return params
