import numpy as np
import pytest

from src.core.errors import ConfigError, ShapeError, UsageError
from src.nncore.dense import DenseNetParams, backward, forward, glorot_init, last_hidden
from src.nncore.optim import OptimizerState, optimizer_step
from tests.conftest import assert_grads_close, numeric_grad


def test_forward_hand_computed():
    params = DenseNetParams.from_layers([([[1.0, -1.0], [0.5, 2.0]], [0.0, -1.0]), ([[1.0, 1.0]], [0.5])])
    out, _ = forward(params, np.array([1.0, 2.0]))
    # hidden: relu([-1, 3.5]) = [0, 3.5]
    np.testing.assert_allclose(out, [4.0])


def test_identity_output_layer_is_affine():
    params = DenseNetParams.from_layers([([[2.0, 0.0]], [1.0])])
    out, _ = forward(params, np.array([-3.0, 7.0]))
    np.testing.assert_allclose(out, [-5.0])


def test_batch_rows_match_single_forward(rng):
    params = glorot_init([4, 6, 2], rng)
    x = rng.normal(size=(5, 4))
    batch, _ = forward(params, x)
    for row, xi in zip(batch, x):
        single, _ = forward(params, xi)
        np.testing.assert_allclose(row, single)


def test_input_width_mismatch_raises(rng):
    params = glorot_init([3, 4, 1], rng)
    with pytest.raises(ShapeError):
        forward(params, np.zeros(5))


def test_invalid_layer_sizes(rng):
    with pytest.raises(ConfigError):
        glorot_init([3], rng)
    with pytest.raises(ConfigError):
        glorot_init([3, 0, 1], rng)


def test_glorot_is_seeded():
    a = glorot_init([5, 7, 1], np.random.default_rng(3))
    b = glorot_init([5, 7, 1], np.random.default_rng(3))
    assert a.checksum() == b.checksum()
    assert all(np.all(bias == 0) for bias in a.biases)


def test_last_hidden_is_output_layer_input(rng):
    params = glorot_init([3, 5, 1], rng)
    x = rng.normal(size=3)
    out, cache = forward(params, x)
    rep = last_hidden(cache)
    assert rep.shape == (5,)
    np.testing.assert_allclose(out, params.weights[-1] @ rep + params.biases[-1])


@pytest.mark.parametrize("instance", range(100))
def test_backward_matches_finite_differences(instance):
    rng = np.random.default_rng(1000 + instance)
    params = glorot_init([3, 4, 3, 2], rng)
    x = rng.normal(size=(2, 3))
    upstream = rng.normal(size=(2, 2))

    out, cache = forward(params, x)
    analytic = backward(params, cache, upstream)

    def loss():
        return float(np.sum(forward(params, x)[0] * upstream))

    assert_grads_close(analytic.arrays, numeric_grad(loss, params.arrays()))


def test_backward_rejects_foreign_cache(rng):
    params = glorot_init([2, 3, 1], rng)
    _, cache = forward(params, np.ones(2))
    with pytest.raises(UsageError):
        backward(params.copy(), cache, np.ones(1))


def test_backward_rejects_bad_upstream_shape(rng):
    params = glorot_init([2, 3, 1], rng)
    _, cache = forward(params, np.ones(2))
    with pytest.raises(ShapeError):
        backward(params, cache, np.ones(2))


def test_sgd_step_is_plain_descent(rng):
    params = glorot_init([2, 2, 1], rng)
    grads = [np.ones_like(a) for a in params.arrays()]
    new, state = optimizer_step(OptimizerState(kind="sgd", learning_rate=0.1), params, grads)
    for old, updated in zip(params.arrays(), new.arrays()):
        np.testing.assert_allclose(updated, old - 0.1)
    assert state.step == 1


def test_adam_first_step_moves_by_learning_rate():
    arrays = [np.array([1.0, -2.0])]
    new, state = optimizer_step(OptimizerState(kind="adam", learning_rate=0.01), arrays, [np.array([3.0, -0.5])])
    np.testing.assert_allclose(new[0], [0.99, -1.99], atol=1e-6)
    assert state.step == 1 and state.first_moment is not None


def test_optimizer_does_not_touch_inputs(rng):
    params = glorot_init([2, 2, 1], rng)
    before = params.checksum()
    optimizer_step(OptimizerState(), params, [np.ones_like(a) for a in params.arrays()])
    assert params.checksum() == before


def test_optimizer_rejects_incongruent_grads(rng):
    params = glorot_init([2, 2, 1], rng)
    with pytest.raises(ShapeError):
        optimizer_step(OptimizerState(), params, [np.ones(3)])


def test_adam_minimizes_quadratic():
    w = [np.array([5.0])]
    state = OptimizerState(kind="adam", learning_rate=0.1)
    for _ in range(500):
        w, state = optimizer_step(state, w, [2 * w[0]])
    assert abs(w[0][0]) < 0.1


def test_glorot_variance_on_a_square_layer():
    weights = np.concatenate(
        [glorot_init([100, 100], np.random.default_rng(seed)).weights[0].ravel() for seed in range(10)]
    )
    assert weights.size == 100_000
    assert abs(weights.var() - 0.01) < 0.05 * 0.01
    assert np.all(glorot_init([4, 1], np.random.default_rng(0)).biases[0] == 0.0)


def test_sgd_strictly_decreases_a_convex_quadratic():
    p = [np.array([0.0])]
    state = OptimizerState(kind="sgd", learning_rate=1e-3)
    losses = [float((p[0][0] - 3.0) ** 2)]
    for _ in range(200):
        p, state = optimizer_step(state, p, [2 * (p[0] - 3.0)])
        losses.append(float((p[0][0] - 3.0) ** 2))
    assert all(later < earlier for earlier, later in zip(losses, losses[1:]))
