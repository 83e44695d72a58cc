"""
Undiscounted temporal-difference learning with a target network.

    loss = sum_z sum_batch (r~ + max_{a' in allowed'} h(theta', x', a', z) - h(theta, x, a, z))^2

Terminal transitions bootstrap from 0.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from src.agents.replay import Batch
from src.core.errors import ConfigError, NumericError, UsageError
from src.enn.network import ValueNetwork, enn_forward, enn_grad
from src.nncore.dense import GradientSet
from src.nncore.optim import OptimizerState, optimizer_step


logger = logging.getLogger(__name__)


def _repeat_index(z, times: int):
    if isinstance(z, np.ndarray) and z.ndim == 2:
        return np.repeat(z, times, axis=0)
    return z


def td_targets(target: ValueNetwork, batch: Batch, z=None) -> np.ndarray:
    """r~ plus the best allowed next value under the target network (0 when terminal)"""
    rows, n_actions, width = batch.next_inputs.shape
    flat = batch.next_inputs.reshape(rows * n_actions, width)
    values = np.asarray(enn_forward(target, flat, _repeat_index(z, n_actions))).reshape(rows, n_actions)
    masked = np.where(batch.next_mask, values, -np.inf)
    has_next = batch.next_mask.any(axis=1)
    bootstrap = np.where(has_next, masked.max(axis=1, initial=-np.inf), 0.0)
    return batch.rewards + bootstrap


def td_loss(net: ValueNetwork, target: ValueNetwork, batch: Batch, z=None) -> float:
    err = np.asarray(enn_forward(net, batch.inputs, z)) - td_targets(target, batch, z)
    return float(np.sum(err * err))


def td_loss_and_grad(net: ValueNetwork, target: ValueNetwork, batch: Batch, z=None) -> tuple[float, GradientSet]:
    """Squared TD error summed over the batch and its gradient w.r.t. the trainable arrays"""
    err = np.asarray(enn_forward(net, batch.inputs, z)) - td_targets(target, batch, z)
    loss = float(np.sum(err * err))
    return loss, enn_grad(net, batch.inputs, z, 2.0 * err)


def tile_indices(batch: Batch, index_vectors: np.ndarray) -> tuple[np.ndarray, Batch]:
    """
    Pair every transition with every index vector.

    Returns:
        (index rows [B*|Z|, d_z], batch of B*|Z| rows)
    """
    n_index = index_vectors.shape[0]
    rows = len(batch)
    z_rows = np.repeat(index_vectors, rows, axis=0)
    tiled = Batch(
        inputs=np.tile(batch.inputs, (n_index, 1)),
        rewards=np.tile(batch.rewards, n_index),
        next_inputs=np.tile(batch.next_inputs, (n_index, 1, 1)),
        next_mask=np.tile(batch.next_mask, (n_index, 1)),
    )
    return z_rows, tiled


def td_update(
    net: ValueNetwork,
    target: ValueNetwork,
    terms: Sequence[tuple[Optional[object], Batch]],
    state: OptimizerState,
):
    """
    One optimizer step on the summed TD loss.

    Args:
        net: Trainable network theta
        target: Frozen snapshot theta'
        terms: (index, batch) pairs; one pair per particle for an ensemble, a
            single tiled pair for an EpiNet, (None, batch) for a plain network
        state: Optimizer state

    Returns:
        (updated network, updated optimizer state, loss before the step)
    """
    if not terms:
        raise UsageError("td_update needs at least one batch")
    total = 0.0
    grads: Optional[GradientSet] = None
    for z, batch in terms:
        if not len(batch):
            raise UsageError("td_update got an empty batch")
        loss, g = td_loss_and_grad(net, target, batch, z)
        total += loss
        grads = g if grads is None else grads + g
    if not np.isfinite(total) or not grads.is_finite():
        raise NumericError(f"non-finite TD loss {total!r}")
    arrays, state = optimizer_step(state, net.trainable_arrays(), grads)
    return net.with_trainable(arrays), state, total


def sync_target(target: ValueNetwork, net: ValueNetwork, step: int, period: int) -> ValueNetwork:
    """Exact copy of net at multiples of the period, the unchanged target otherwise"""
    if period < 1:
        raise ConfigError("target sync period K must be at least 1")
    if step % period == 0:
        logger.debug("Target sync at update %d", step)
        return net.snapshot()
    return target
