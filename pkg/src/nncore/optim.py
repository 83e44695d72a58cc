"""
First-order optimizers over lists of parameter arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from src.core.errors import ConfigError, NumericError, ShapeError
from src.nncore.dense import GradientSet


SGD = "sgd"
ADAM = "adam"

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    """Optimizer kind, learning rate and (adam only) moment estimates"""

    kind: str = ADAM
    learning_rate: float = 1e-3
    first_moment: Optional[list[np.ndarray]] = field(default=None, repr=False)
    second_moment: Optional[list[np.ndarray]] = field(default=None, repr=False)
    step: int = 0

    def __post_init__(self):
        if self.kind not in (SGD, ADAM):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


def _as_arrays(params) -> list[np.ndarray]:
    return list(params.arrays()) if hasattr(params, "arrays") else list(params)


def optimizer_step(state: OptimizerState, params, grads: GradientSet | Sequence[np.ndarray]):
    """
    Apply one update.

    Args:
        state: Current optimizer state
        params: DenseNetParams-like object (arrays()/with_arrays()) or a list of arrays
        grads: Gradients congruent with the parameter arrays

    Returns:
        (updated params of the same type, updated state); inputs are not modified
    """
    arrays = _as_arrays(params)
    grad_arrays = list(grads.arrays) if isinstance(grads, GradientSet) else list(grads)
    if len(arrays) != len(grad_arrays) or any(a.shape != g.shape for a, g in zip(arrays, grad_arrays)):
        raise ShapeError("gradients are not congruent with parameters")
    if not all(np.all(np.isfinite(g)) for g in grad_arrays):
        raise NumericError("non-finite gradient passed to optimizer_step")

    lr = state.learning_rate
    if state.kind == SGD:
        new_arrays = [p - lr * g for p, g in zip(arrays, grad_arrays)]
        new_state = replace(state, step=state.step + 1)
    else:
        beta1, beta2 = ADAM_BETAS
        m_prev = state.first_moment or [np.zeros_like(p) for p in arrays]
        v_prev = state.second_moment or [np.zeros_like(p) for p in arrays]
        if any(m.shape != p.shape for m, p in zip(m_prev, arrays)):
            raise ShapeError("adam moments are not congruent with parameters")
        step = state.step + 1
        m = [beta1 * mk + (1.0 - beta1) * g for mk, g in zip(m_prev, grad_arrays)]
        v = [beta2 * vk + (1.0 - beta2) * g * g for vk, g in zip(v_prev, grad_arrays)]
        c1 = 1.0 - beta1 ** step
        c2 = 1.0 - beta2 ** step
        new_arrays = [p - lr * (mk / c1) / (np.sqrt(vk / c2) + ADAM_EPS) for p, mk, vk in zip(arrays, m, v)]
        new_state = replace(state, first_moment=m, second_moment=v, step=step)

    if hasattr(params, "with_arrays"):
        return params.with_arrays(new_arrays), new_state
    return new_arrays, new_state
