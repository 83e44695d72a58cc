import numpy as np
import pytest

from src.agents.agent import (
    DQNAgent,
    IndexLogEntry,
    RandomAgent,
    RVFAgent,
    agent_from_checkpoint,
    commitment_violations,
    lifecycle_index_refresh,
    make_agent,
)
from src.agents.last_layer import LastLayerStats, sherman_morrison
from src.agents.replay import ReplayBuffer, Transition, stack_batch, store_perturbed
from src.agents.selection import (
    dqn_select,
    epsilon_greedy_select,
    neural_linucb_select,
    neural_ts_select,
    neural_ucb_select,
    rvf_select,
)
from src.agents.td import sync_target, td_loss, td_loss_and_grad, td_targets, td_update, tile_indices
from src.config.experiment_config import AgentConfig, AgentSpec, NetworkSpec
from src.core.checkpoint import Checkpoint
from src.core.errors import ContractViolation, UsageError
from src.enn.ensemble import init_ensemble
from src.enn.epinet import init_epinet
from src.enn.index import ENSEMBLE, IndexSpec
from src.enn.epinet import epinet_forward
from src.enn.network import PlainValueNetwork, enn_forward, init_plain, last_layer_features
from src.envs.features import A1, A2, action_inputs
from src.envs.seqrec import NOOP, SeqRecEnvironment, toy_config
from src.nncore.dense import DenseNetParams, forward, last_hidden
from src.nncore.optim import OptimizerState
from tests.conftest import assert_grads_close, numeric_grad


TABLE = {A1: np.array([1.0, 0.0]), A2: np.array([0.0, 1.0])}


def transition(rng, reward=0.0, terminal=False, width=3):
    return Transition(
        user_features=np.zeros(0),
        action_features=TABLE[A2],
        interact_features=rng.normal(size=width),
        reward=reward,
        next_interact_features=rng.normal(size=width),
        next_actions=() if terminal else (A1, A2),
        terminal=terminal,
    )


def zero_network(width):
    return PlainValueNetwork(DenseNetParams.from_layers([(np.zeros((4, width)), np.zeros(4)), (np.zeros((1, 4)), [0.0])]))


def toy_env():
    env = SeqRecEnvironment(toy_config())
    env.reset()
    return env


def test_sherman_morrison_matches_direct_inverse(rng):
    for _ in range(20):
        m = rng.normal(size=(4, 4))
        a = m @ m.T + np.eye(4)
        phi = rng.normal(size=4)
        np.testing.assert_allclose(sherman_morrison(np.linalg.inv(a), phi), np.linalg.inv(a + np.outer(phi, phi)), atol=1e-10)


def test_last_layer_stats_is_ridge_regression(rng):
    stats = LastLayerStats(3, ridge=2.0)
    phis, rewards = rng.normal(size=(30, 3)), rng.normal(size=30)
    for phi, r in zip(phis, rewards):
        stats.update(phi, r)
    expected = np.linalg.solve(2.0 * np.eye(3) + phis.T @ phis, phis.T @ rewards)
    np.testing.assert_allclose(stats.theta(), expected, atol=1e-9)
    np.testing.assert_allclose(stats.A_inv, np.linalg.inv(stats.A), atol=1e-9)
    assert stats.count == 30


def test_transition_terminal_flag_must_match_next_actions(rng):
    with pytest.raises(UsageError):
        Transition(np.zeros(0), TABLE[A1], np.zeros(2), 0.0, np.zeros(2), (), terminal=False)


def test_replay_buffer_is_fifo(rng):
    buffer = ReplayBuffer(3, rng)
    items = [transition(rng, reward=float(k)) for k in range(5)]
    for item in items:
        buffer.add(item)
    assert [t.reward for t in buffer] == [2.0, 3.0, 4.0]
    assert len(buffer.sample(10)) == 10


def test_reward_perturbation_has_the_configured_spread():
    rng = np.random.default_rng(0)
    sigma = 0.1
    buffers = [ReplayBuffer(4, rng) for _ in range(10)]
    item = transition(np.random.default_rng(1), reward=1.0)
    draws = []
    for _ in range(10_000):
        draws.extend(store_perturbed(buffers, item, sigma, rng, ENSEMBLE))
    assert len(draws) == 100_000
    assert abs(np.std(draws) - sigma) <= 0.05 * sigma
    stored = list(buffers[0])[-1]
    assert stored.true_reward == 1.0 and stored.reward != 1.0


def test_zero_sigma_stores_the_true_reward(rng):
    buffers = [ReplayBuffer(4, rng)]
    noises = store_perturbed(buffers, transition(rng, reward=1.0), 0.0, rng, "plain")
    assert noises == [0.0] and list(buffers[0])[0].reward == 1.0


def test_td_targets_bootstrap_only_from_allowed_actions(rng):
    net = init_plain([5, 4, 1], rng)
    live, dead = transition(rng, reward=0.5), transition(rng, reward=1.0, terminal=True)
    batch = stack_batch([live, dead], TABLE)
    targets = td_targets(net, batch)
    next_values = [float(enn_forward(net, np.concatenate([TABLE[a], live.next_interact_features]))) for a in (A1, A2)]
    assert targets[0] == pytest.approx(0.5 + max(next_values))
    assert targets[1] == 1.0


def test_td_bootstrap_respects_the_mask(rng):
    net = init_plain([5, 4, 1], rng)
    only_a1 = Transition(np.zeros(0), TABLE[A2], np.zeros(3), 0.0, np.ones(3), (A1,), terminal=False)
    batch = stack_batch([only_a1], TABLE)
    assert batch.next_mask.tolist() == [[True, False]]
    expected = float(enn_forward(net, np.concatenate([TABLE[A1], np.ones(3)])))
    assert td_targets(net, batch)[0] == pytest.approx(expected)


@pytest.mark.parametrize("kind", ["plain", "ensemble", "epinet"])
@pytest.mark.parametrize("instance", range(35))
def test_td_gradient_matches_finite_differences(kind, instance):
    rng = np.random.default_rng(4000 + instance)
    sizes = [5, 4, 1]
    if kind == "plain":
        net, z = init_plain(sizes, rng), None
    elif kind == "ensemble":
        net, z = init_ensemble(sizes, 2, 0.3, rng), int(rng.integers(1, 3))
    else:
        net, z = init_epinet(sizes, 2, 0.3, rng, head_width=3), None
    target = net.snapshot()
    batch = stack_batch([transition(rng, reward=float(k % 2), terminal=k == 2) for k in range(3)], TABLE)
    if kind == "epinet":
        z, batch = tile_indices(batch, rng.normal(size=(2, 2)))

    _, analytic = td_loss_and_grad(net, target, batch, z)
    if kind == "epinet":
        # the heads see a stop-gradient copy of the representation
        _, cache = forward(net.base, batch.inputs)
        frozen = last_hidden(cache).copy()
        targets = td_targets(target, batch, z)

        def loss():
            err = epinet_forward(net, batch.inputs, z, sigma_override=frozen) - targets
            return float(np.sum(err * err))
    else:

        def loss():
            return td_loss(net, target, batch, z)

    assert_grads_close(analytic.arrays, numeric_grad(loss, net.trainable_arrays()))


def test_td_update_decreases_loss_on_a_fixed_batch(rng):
    net = init_plain([5, 8, 1], rng)
    target = net.snapshot()
    batch = stack_batch([transition(rng, reward=1.0, terminal=True) for _ in range(8)], TABLE)
    state = OptimizerState(kind="adam", learning_rate=1e-2)
    first = None
    for _ in range(200):
        net, state, loss = td_update(net, target, [(None, batch)], state)
        first = loss if first is None else first
    assert td_loss(net, target, batch) < 0.1 * first


def test_sync_target_copies_on_the_period(rng):
    net = init_plain([3, 2, 1], rng)
    stale = net.snapshot()
    moved = net.with_trainable([a + 1.0 for a in net.trainable_arrays()])
    assert sync_target(stale, moved, 3, 4) is stale
    synced = sync_target(stale, moved, 8, 4)
    assert synced.checksum() == moved.checksum() and synced is not moved


def test_greedy_ties_go_to_the_lowest_id():
    net = zero_network(5)
    assert dqn_select(net, np.zeros(0), TABLE, np.zeros(3), {A2, A1}) == A1
    stats = LastLayerStats(4)
    for select in (neural_ucb_select, neural_linucb_select):
        assert select(net, stats, np.zeros(0), TABLE, np.zeros(3), {A1, A2}, 1.0) == A1


def test_empty_allowed_set_is_a_contract_violation():
    net = zero_network(5)
    with pytest.raises(ContractViolation):
        dqn_select(net, np.zeros(0), TABLE, np.zeros(3), set())


def test_singleton_allowed_set_is_returned_directly(rng):
    net = zero_network(5)
    assert epsilon_greedy_select(net, np.zeros(0), TABLE, np.zeros(3), {A2}, 1.0, rng) == A2
    assert neural_ts_select(net, LastLayerStats(4), np.zeros(0), TABLE, np.zeros(3), {NOOP}, 1.0, rng) == NOOP
    with pytest.raises(UsageError):
        rvf_select(net, None, np.zeros(0), TABLE, np.zeros(3), {A1, A2})


def test_index_is_held_for_the_whole_life_cycle(rng):
    spec, indices = IndexSpec(ENSEMBLE, 1000), {}
    first, drawn = lifecycle_index_refresh(0, {A1, A2}, indices, spec, rng, NOOP)
    assert drawn
    for _ in range(9):
        z, drawn = lifecycle_index_refresh(0, {A1, A2}, indices, spec, rng, NOOP)
        assert z is first and not drawn
    _, drawn = lifecycle_index_refresh(0, {NOOP}, indices, spec, rng, NOOP)
    assert drawn
    _, drawn = lifecycle_index_refresh(0, {A1, A2}, indices, spec, rng, None, boundary=True)
    assert drawn


def test_commitment_violations_flag_silent_index_changes():
    log = [IndexLogEntry(0, 1, "a", True), IndexLogEntry(1, 1, "a", False), IndexLogEntry(2, 1, "b", False)]
    assert commitment_violations(log) == [log[2]]
    assert commitment_violations(log[:2] + [IndexLogEntry(2, 1, "b", True)]) == []


def test_epsilon_decays_linearly_over_half_the_run():
    agent = make_agent(AgentSpec("eg", "egreedy"), toy_env(), seed=0)
    agent.plan(100)
    assert agent.epsilon == 1.0
    agent.env_steps = 25
    assert agent.epsilon == pytest.approx(1.0 + (0.05 - 1.0) * 0.5)
    agent.env_steps = 80
    assert agent.epsilon == pytest.approx(0.05)
    agent.freeze()
    assert agent.epsilon == 0.0


@pytest.mark.parametrize(
    "kind, cls",
    [("random", RandomAgent), ("egreedy", DQNAgent), ("neural_linucb", DQNAgent), ("ensemble_de", RVFAgent), ("epinet_de", RVFAgent)],
)
def test_make_agent_kinds(kind, cls):
    agent = make_agent(AgentSpec(kind, kind), toy_env(), seed=0)
    assert isinstance(agent, cls)


def test_ensemble_agent_keeps_one_buffer_per_particle():
    spec = AgentSpec("ens", "ensemble_de", AgentConfig(ensemble_size=4, sigma=0.5))
    agent = make_agent(spec, toy_env(), seed=0)
    agent.observe(0, transition(np.random.default_rng(0), reward=1.0, width=10))
    assert len(agent.buffers) == 4 and all(len(b) == 1 for b in agent.buffers)
    rewards = {list(b)[0].reward for b in agent.buffers}
    assert len(rewards) == 4


def test_agents_are_seeded():
    a = make_agent(AgentSpec("e", "epinet_de"), toy_env(), seed=3)
    b = make_agent(AgentSpec("e", "epinet_de"), toy_env(), seed=3)
    c = make_agent(AgentSpec("e", "epinet_de"), toy_env(), seed=4)
    assert a.checksum() == b.checksum() != c.checksum()


@pytest.mark.parametrize("kind", ["ensemble_de", "epinet_de", "neural_ucb"])
def test_agent_checkpoint_restores_a_frozen_agent(kind):
    spec = AgentSpec(kind, kind, AgentConfig(ensemble_size=3, index_dim=4), NetworkSpec((6,)))
    env = toy_env()
    agent = make_agent(spec, env, seed=1)
    blob = agent.to_checkpoint().to_bytes()
    restored = agent_from_checkpoint(Checkpoint.from_bytes(blob), env, seed=1)
    assert restored.frozen and restored.kind == kind
    assert restored.checksum() == agent.checksum()
    assert restored.network.hidden == (6,)


def test_random_agent_has_no_checkpoint():
    agent = make_agent(AgentSpec("r", "random"), toy_env(), seed=0)
    with pytest.raises(UsageError):
        agent.to_checkpoint()


def orthogonal_network():
    """phi(a1) = e1 and phi(a2) = e2 for any interaction features; Q = 0"""
    hidden = np.zeros((4, 5))
    hidden[0, 0] = hidden[1, 1] = 1.0
    return PlainValueNetwork(DenseNetParams.from_layers([(hidden, np.zeros(4)), (np.zeros((1, 4)), [0.0])]))


def test_full_epsilon_is_uniform_over_allowed():
    net = init_plain([5, 6, 1], np.random.default_rng(0))
    rng = np.random.default_rng(1)
    draws = 10_000
    picks = [epsilon_greedy_select(net, np.zeros(0), TABLE, rng.normal(size=3), {A1, A2}, 1.0, rng) for _ in range(draws)]
    freq = picks.count(A1) / draws
    assert abs(freq - 0.5) < 3 * np.sqrt(0.25 / draws)


def test_zero_epsilon_matches_greedy():
    net = init_plain([5, 6, 1], np.random.default_rng(0))
    rng = np.random.default_rng(2)
    for _ in range(2_000):
        xi = rng.normal(size=3)
        assert epsilon_greedy_select(net, np.zeros(0), TABLE, xi, {A1, A2}, 0.0, rng) == dqn_select(
            net, np.zeros(0), TABLE, xi, {A1, A2}
        )


def test_thompson_sampling_without_noise_is_greedy():
    net = init_plain([5, 6, 1], np.random.default_rng(3))
    stats = LastLayerStats(6)
    rng = np.random.default_rng(4)
    for _ in range(500):
        xi = rng.normal(size=3)
        assert neural_ts_select(net, stats, np.zeros(0), TABLE, xi, {A1, A2}, 0.0, rng) == dqn_select(
            net, np.zeros(0), TABLE, xi, {A1, A2}
        )


def test_thompson_sampling_splits_symmetric_arms_evenly():
    # action columns are zero, so both arms share phi = relu(bias) and Q = 0
    hidden = np.zeros((4, 5))
    hidden[:, 2:] = np.random.default_rng(5).normal(size=(4, 3))
    net = PlainValueNetwork(DenseNetParams.from_layers([(hidden, np.ones(4)), (np.zeros((1, 4)), [0.0])]))
    stats = LastLayerStats(4)
    rng = np.random.default_rng(6)
    draws = 10_000
    picks = [neural_ts_select(net, stats, np.zeros(0), TABLE, np.zeros(3), {A1, A2}, 1.0, rng) for _ in range(draws)]
    freq = picks.count(A1) / draws
    assert abs(freq - 0.5) < 3 * np.sqrt(0.25 / draws)


def test_updates_shrink_the_pulled_arm_variance_only():
    net = orthogonal_network()
    phi = last_layer_features(net, action_inputs(np.zeros(0), TABLE, np.zeros(3), [A1, A2]))
    np.testing.assert_array_equal(phi[:, :2], np.eye(2))
    stats = LastLayerStats(4)
    for _ in range(1000):
        stats.update(phi[0], 0.0)
    var = stats.variance(phi)
    assert var[0] == pytest.approx(1.0 / 1001)
    assert var[1] == pytest.approx(1.0)


def test_ucb_moves_to_the_less_explored_arm():
    net = orthogonal_network()
    stats = LastLayerStats(4)
    xi = np.zeros(3)
    phi = last_layer_features(net, action_inputs(np.zeros(0), TABLE, xi, [A1, A2]))
    assert neural_ucb_select(net, stats, np.zeros(0), TABLE, xi, {A1, A2}, 1.0) == A1
    stats.update(phi[0], 0.0)
    assert neural_ucb_select(net, stats, np.zeros(0), TABLE, xi, {A1, A2}, 1.0) == A2

    bonuses = []
    for _ in range(20):
        bonuses.append(float(np.sqrt(stats.variance(phi[0]))))
        stats.update(phi[0], 0.0)
    assert all(later < earlier for earlier, later in zip(bonuses, bonuses[1:]))


@pytest.mark.parametrize("kind", ["egreedy", "neural_ts", "neural_ucb", "neural_linucb"])
def test_freezing_zeroes_every_exploration_knob(kind):
    agent = make_agent(AgentSpec(kind, kind, AgentConfig(ts_scale=0.5, ucb_scale=2.0)), toy_env(), seed=0)
    agent.plan(100)
    agent.freeze()
    cfg = agent.config
    assert (cfg.epsilon_start, cfg.epsilon_end, cfg.ts_scale, cfg.ucb_scale) == (0.0, 0.0, 0.0, 0.0)
    assert agent.epsilon == 0.0
