"""Isotropic Gaussian random search baseline."""

from __future__ import annotations

import numpy as np

from .base import AskTellOptimizer

__all__ = ["RandomSearch"]


class RandomSearch(AskTellOptimizer):
    """Proposes iid N(0, sigma0^2 I) batches; feedback never changes the
    proposal distribution.  Best-so-far bookkeeping belongs to the caller.
    """

    kind = "random"
    kind_code = 5

    def __init__(self, dim: int, population: int = 40, sigma0: float = 3.0, seed=None):
        super().__init__(dim, population, seed)
        if sigma0 < 0:
            raise ValueError(f"sigma0 must be >= 0, got {sigma0}")
        self.sigma0 = float(sigma0)
        self._mean = np.zeros(self._dim)

    @property
    def mean(self) -> np.ndarray:
        v = self._mean.view()
        v.flags.writeable = False
        return v

    @property
    def sigma(self) -> float:
        return self.sigma0

    def _propose(self) -> np.ndarray:
        return self.sigma0 * self._rng.standard_normal(
            (self._population, self._dim)
        )

    def _update(self, codes: np.ndarray, scores: np.ndarray) -> None:
        pass

    def snapshot_config(self) -> dict:
        return {
            "dim": self._dim,
            "population": self._population,
            "sigma0": self.sigma0,
        }

    @classmethod
    def from_snapshot_parts(cls, config: dict, scalars: dict, arrays: dict, t: int):
        opt = cls(**config)
        opt._t = int(t)
        return opt
