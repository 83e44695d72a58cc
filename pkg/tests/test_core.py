import numpy as np
import pytest

from src.core.cache import RingCache
from src.core.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.core.errors import ValidationError
from src.core.rng import array_checksum, component_rng, short_digest


def test_component_streams_are_reproducible_and_independent():
    a = component_rng(7, "agent", "x").random(5)
    b = component_rng(7, "agent", "x").random(5)
    c = component_rng(7, "agent", "y").random(5)
    d = component_rng(8, "agent", "x").random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_checksum_sees_shape_and_values():
    base = array_checksum([np.zeros(4)])
    assert base == array_checksum([np.zeros(4)])
    assert base != array_checksum([np.zeros((2, 2))])
    assert base != array_checksum([np.array([0.0, 0.0, 0.0, 1e-300])])


def test_short_digest():
    assert short_digest(None) == "-"
    assert short_digest(4) == "p4"
    assert len(short_digest(np.ones(3))) == 8


def test_ring_cache_evicts_the_oldest():
    ring = RingCache(max_size=3)
    evicted = [ring.append(k) for k in range(5)]
    assert evicted == [None, None, None, 0, 1]
    assert list(ring) == [2, 3, 4]
    assert ring[0] == 2 and len(ring) == 3
    with pytest.raises(IndexError):
        ring[3]


def test_checkpoint_file_round_trip(tmp_path):
    ckpt = Checkpoint("plain", {"w": np.arange(6.0).reshape(2, 3), "b": np.array([0.5])}, {"seed": 3})
    path = save_checkpoint(tmp_path / "sub" / "x.ckpt", ckpt)
    loaded = load_checkpoint(path)
    assert loaded.kind == "plain" and loaded.meta == {"seed": 3}
    np.testing.assert_array_equal(loaded.arrays["w"], ckpt.arrays["w"])
    assert list(loaded.arrays) == ["w", "b"]


def test_truncated_checkpoint_is_rejected(tmp_path):
    blob = Checkpoint("plain", {"w": np.ones(4)}).to_bytes()
    with pytest.raises(ValidationError):
        Checkpoint.from_bytes(blob[:-8])
    with pytest.raises(ValidationError):
        Checkpoint.from_bytes(blob + b"\x00")
    with pytest.raises(ValidationError):
        load_checkpoint(tmp_path / "missing.ckpt")
