import numpy as np
import pytest

from src.config.experiment_config import AgentConfig, AgentSpec, EnvSpec, ExperimentConfig, NetworkSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def numeric_grad(fn, arrays, h=1e-6):
    """Central finite differences of a scalar fn() w.r.t. every entry of every array (edited in place)"""
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = a[idx]
            a[idx] = old + h
            up = fn()
            a[idx] = old - h
            down = fn()
            a[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def assert_grads_close(analytic, numeric):
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-6)


@pytest.fixture
def quick_config():
    """Toy SeqRec sweep small enough for unit tests"""

    def build(*kinds, seeds=(0, 1), life_cycles=5, **env):
        fast = AgentConfig(batch_size=8, warmup=8, target_period=10, ensemble_size=3, index_dim=3, train_indices=4)
        agents = tuple(AgentSpec(name=k, kind=k, config=fast, network=NetworkSpec((8,))) for k in kinds)
        return ExperimentConfig(
            name="quick",
            environment=EnvSpec(**env),
            agents=agents,
            seeds=tuple(seeds),
            life_cycles=life_cycles,
        )

    return build
