"""
Ridge statistics over last-layer features, kept in closed form.

A = lambda * I + sum(phi phi^T) and its inverse are maintained together; the
inverse is updated with the Sherman-Morrison identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src.core.errors import ConfigError, NumericError, ShapeError


def sherman_morrison(a_inv: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """(A + phi phi^T)^-1 from A^-1"""
    a_phi = a_inv @ phi
    denom = 1.0 + phi @ a_phi
    if not np.isfinite(denom) or denom <= 0.0:
        raise NumericError("rank-one update would make the covariance singular")
    return a_inv - np.outer(a_phi, a_phi) / denom


@dataclass
class LastLayerStats:
    """Covariance A, its inverse and the reward-weighted response vector"""

    dim: int
    ridge: float = 1.0
    A: np.ndarray = field(default=None, repr=False)
    A_inv: np.ndarray = field(default=None, repr=False)
    response: np.ndarray = field(default=None, repr=False)
    count: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("feature dimension must be at least 1")
        if not self.ridge > 0:
            raise ConfigError("ridge lambda must be positive")
        if self.A is None:
            self.A = self.ridge * np.eye(self.dim)
            self.A_inv = np.eye(self.dim) / self.ridge
            self.response = np.zeros(self.dim)

    def _check(self, phi: np.ndarray) -> np.ndarray:
        phi = np.asarray(phi, dtype=np.float64)
        if phi.shape[-1] != self.dim:
            raise ShapeError(f"expected features of width {self.dim}, got {phi.shape}")
        return phi

    def variance(self, phi: np.ndarray) -> np.ndarray:
        """phi^T A^-1 phi for one feature vector or each row"""
        phi = self._check(phi)
        return np.einsum("...i,ij,...j->...", phi, self.A_inv, phi)

    def theta(self) -> np.ndarray:
        """Ridge-regression head A^-1 b"""
        return self.A_inv @ self.response

    def update(self, phi: np.ndarray, reward: float):
        phi = self._check(phi)
        self.A = self.A + np.outer(phi, phi)
        self.A_inv = sherman_morrison(self.A_inv, phi)
        self.response = self.response + float(reward) * phi
        self.count += 1

    def arrays(self) -> dict[str, np.ndarray]:
        return {"stats.A": self.A, "stats.A_inv": self.A_inv, "stats.response": self.response}

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], ridge: float, count: int = 0) -> "LastLayerStats":
        a = arrays["stats.A"]
        return cls(a.shape[0], ridge, a.copy(), arrays["stats.A_inv"].copy(), arrays["stats.response"].copy(), count)
