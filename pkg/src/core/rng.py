"""
Seeded random streams and checksums.

Each component of a run (environment, agent exploration, replay sampling,
reward noise, ...) draws from its own generator derived from the run seed and
the component's name, so adding a consumer never shifts another one's draws.
"""

from __future__ import annotations

import hashlib
import zlib
from typing import Iterable

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def component_rng(seed: int, *names: str) -> np.random.Generator:
    """
    Build an independent generator for a named component of a seeded run.

    Args:
        seed: Run seed
        names: Component path, e.g. ("agent", "epinet-de", "replay")

    Returns:
        numpy Generator whose stream depends only on (seed, names)
    """
    spawn_key = tuple(_name_key(name) for name in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))


def array_checksum(arrays: Iterable[np.ndarray]) -> str:
    """sha256 over the shapes and little-endian float64 bytes of the arrays"""
    digest = hashlib.sha256()
    for array in arrays:
        data = np.ascontiguousarray(array, dtype="<f8")
        digest.update(repr(data.shape).encode("ascii"))
        digest.update(data.tobytes())
    return digest.hexdigest()


def short_digest(array: np.ndarray | int | None) -> str:
    """Eight hex characters identifying an epistemic index in decision logs"""
    if array is None:
        return "-"
    if isinstance(array, (int, np.integer)):
        return f"p{int(array)}"
    return array_checksum([np.asarray(array)])[:8]
