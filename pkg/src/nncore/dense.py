"""
Dense feed-forward networks with explicit layer-cache backpropagation.

Hidden layers use rectified-linear activations and the output layer is the
identity. All arithmetic is float64. A forward pass accepts a single input
vector or a batch with one input per row; backward sums parameter gradients
over the rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.core.errors import ConfigError, NumericError, ShapeError, UsageError
from src.core.rng import array_checksum


RELU = "relu"
IDENTITY = "identity"
_ACTIVATIONS = (RELU, IDENTITY)


@dataclass
class DenseNetParams:
    """Ordered (weight [out x in], bias [out]) layers with per-layer activation tags"""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: tuple[str, ...]

    def __post_init__(self):
        if not self.weights or len(self.weights) != len(self.biases) or len(self.weights) != len(self.activations):
            raise ConfigError("weights, biases and activations must be non-empty and of equal length")
        for tag in self.activations:
            if tag not in _ACTIVATIONS:
                raise ConfigError(f"unknown activation {tag!r}")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeError(
                    f"layer {k} expects {w.shape[1]} inputs but layer {k - 1} produces {self.weights[k - 1].shape[0]}"
                )

    @classmethod
    def from_layers(cls, layers: Sequence[tuple], activations: Optional[Sequence[str]] = None) -> "DenseNetParams":
        """
        Build parameters from explicit (weight, bias) pairs.

        Args:
            layers: Sequence of (weight matrix, bias vector)
            activations: Per-layer tags; defaults to relu hidden layers and an identity output

        Returns:
            DenseNetParams holding float64 copies
        """
        weights = [np.array(w, dtype=np.float64, ndmin=2) for w, _ in layers]
        biases = [np.array(b, dtype=np.float64, ndmin=1) for _, b in layers]
        if activations is None:
            activations = [RELU] * (len(layers) - 1) + [IDENTITY]
        return cls(weights, biases, tuple(activations))

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_size(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order [W0, b0, W1, b1, ...]"""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "DenseNetParams":
        """New params with the same topology and the given arrays"""
        if len(arrays) != 2 * len(self.weights):
            raise ShapeError(f"expected {2 * len(self.weights)} arrays, got {len(arrays)}")
        return DenseNetParams(list(arrays[0::2]), list(arrays[1::2]), self.activations)

    def copy(self) -> "DenseNetParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def checksum(self) -> str:
        return array_checksum(self.arrays())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class GradientSet:
    """One gradient array per parameter array, in the params' canonical order"""

    arrays: list[np.ndarray]
    inputs: Optional[np.ndarray] = field(default=None, repr=False)

    def __add__(self, other: "GradientSet") -> "GradientSet":
        if len(self.arrays) != len(other.arrays):
            raise ShapeError("gradient sets are not congruent")
        return GradientSet([a + b for a, b in zip(self.arrays, other.arrays)])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays)


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations recorded by forward()"""

    params: DenseNetParams
    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    single: bool


def glorot_init(layer_sizes: Sequence[int], rng: np.random.Generator) -> DenseNetParams:
    """
    Glorot-normal initialization: weight variance 2/(fan_in + fan_out), zero biases.

    Args:
        layer_sizes: Input size followed by each layer's output size
        rng: Seeded generator

    Returns:
        Freshly initialized DenseNetParams
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ConfigError(f"layer sizes must list at least two positive sizes, got {list(layer_sizes)}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        weights.append(rng.normal(0.0, std, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    activations = (RELU,) * (len(weights) - 1) + (IDENTITY,)
    return DenseNetParams(weights, biases, activations)


def _activate(tag: str, z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) if tag == RELU else z


def forward(params: DenseNetParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """
    Affine-then-activation composition over all layers.

    Args:
        params: Network parameters
        x: Input vector [in] or batch [rows, in]

    Returns:
        (output [out] or [rows, out], cache for backward)
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.ndim != 2 or h.shape[1] != params.input_size:
        raise ShapeError(f"network expects inputs of width {params.input_size}, got shape {x.shape}")

    inputs, pre = [], []
    for w, b, tag in zip(params.weights, params.biases, params.activations):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = _activate(tag, z)
    cache = ForwardCache(params=params, inputs=inputs, pre_activations=pre, single=single)
    return (h[0] if single else h), cache


def last_hidden(cache: ForwardCache) -> np.ndarray:
    """Activations feeding the output layer (the network's last-layer representation)"""
    rep = cache.inputs[-1]
    return rep[0] if cache.single else rep


def backward(params: DenseNetParams, cache: ForwardCache, upstream: np.ndarray) -> GradientSet:
    """
    Reverse-mode gradients of sum(output * upstream) w.r.t. every parameter.

    Args:
        params: The params forward() was called with
        cache: Cache returned by that forward() call
        upstream: dL/d(output), same shape as the forward output

    Returns:
        GradientSet over params.arrays(); `.inputs` holds dL/dx
    """
    if cache.params is not params:
        raise UsageError("forward cache was produced by a different parameter set")
    g = np.asarray(upstream, dtype=np.float64)
    g = g[None, :] if cache.single else g
    expected = cache.pre_activations[-1].shape
    if g.shape != expected:
        raise ShapeError(f"upstream gradient shape {g.shape} does not match output shape {expected}")

    grads: list[np.ndarray] = [None] * (2 * len(params.weights))
    for k in range(len(params.weights) - 1, -1, -1):
        if params.activations[k] == RELU:
            g = g * (cache.pre_activations[k] > 0.0)
        grads[2 * k] = g.T @ cache.inputs[k]
        grads[2 * k + 1] = g.sum(axis=0)
        g = g @ params.weights[k]
    if not all(np.all(np.isfinite(a)) for a in grads):
        raise NumericError("non-finite gradient in dense backward pass")
    return GradientSet(grads, inputs=g[0] if cache.single else g)
