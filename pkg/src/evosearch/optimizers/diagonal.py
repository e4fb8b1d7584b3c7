"""Separable CMA-ES: diagonal covariance with boosted learning rates.

Restricting the covariance to its diagonal cuts the adaptation cost to O(d)
per generation and permits much larger learning rates; both covariance rates
are multiplied by (d + 2) / 3 relative to the full-matrix defaults.  Mean
and step-size adaptation are identical to the full-covariance strategy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import rank_weight
from .base import AskTellOptimizer

__all__ = ["DiagonalState", "DiagonalCMA"]


@dataclass
class DiagonalState:
    """Read-only view of a DiagonalCMA's adaptive state."""

    mean: np.ndarray       # m_t
    sigma: float           # sigma_t
    diag: np.ndarray       # per-coordinate covariance entries, all > 0
    boost: float           # learning-rate multiplier (d + 2) / 3
    path_c: np.ndarray
    path_sigma: np.ndarray
    c1: float              # boosted rank-one rate
    c_mu: float            # boosted rank-mu rate
    c_sigma: float
    d_sigma: float
    c_c: float
    mu_w: float
    t: int


def _readonly(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.flags.writeable = False
    return v


class DiagonalCMA(AskTellOptimizer):
    """Evolution strategy adapting a diagonal exploration covariance.

    Same interface and defaults as CholeskyCMA where they overlap; the
    covariance vector starts at all ones and every entry stays positive.
    """

    kind = "diagonal"
    kind_code = 2

    def __init__(
        self,
        dim: int,
        population: int = 40,
        sigma0: float = 3.0,
        cutoff: int | None = None,
        c1: float | None = None,
        c_mu: float | None = None,
        c_sigma: float | None = None,
        d_sigma: float | None = None,
        c_c: float | None = None,
        initial_mean=None,
        seed=None,
    ):
        super().__init__(dim, population, seed)
        if sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {sigma0}")
        d = self._dim
        b = self._population
        self._mu = max(1, b // 2) if cutoff is None else int(cutoff)
        if not 1 <= self._mu <= b:
            raise ValueError(f"cutoff must satisfy 1 <= mu <= B, got {self._mu}")

        raw = np.log(self._mu + 0.5) - np.log(np.arange(1, self._mu + 1))
        self._w = raw / raw.sum()
        self.mu_w = float(1.0 / np.sum(self._w**2))

        self.c_sigma = (
            float(c_sigma)
            if c_sigma is not None
            else np.sqrt(self.mu_w) / (np.sqrt(d) + np.sqrt(self.mu_w))
        )
        self.d_sigma = (
            float(d_sigma)
            if d_sigma is not None
            else 1.0
            + self.c_sigma
            + 2.0 * max(0.0, np.sqrt((self.mu_w - 1.0) / (d + 1.0)) - 1.0)
        )
        self.c_c = float(c_c) if c_c is not None else 4.0 / (d + 4.0)
        self.boost = (d + 2.0) / 3.0
        full_c1 = 2.0 / ((d + 1.3) ** 2 + self.mu_w)
        full_cmu = min(
            1.0 - full_c1,
            2.0 * (self.mu_w - 2.0 + 1.0 / self.mu_w) / ((d + 2.0) ** 2 + self.mu_w),
        )
        self.c1 = float(c1) if c1 is not None else self.boost * full_c1
        self.c_mu = float(c_mu) if c_mu is not None else min(
            1.0 - self.c1, self.boost * full_cmu
        )
        if self.c1 < 0 or self.c_mu < 0 or self.c1 + self.c_mu > 1:
            raise ValueError(
                f"need c1, c_mu >= 0 and c1 + c_mu <= 1, got {self.c1}, {self.c_mu}"
            )
        self.chi_d = np.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d**2))

        self.sigma0 = float(sigma0)
        self._sigma = float(sigma0)
        if initial_mean is None:
            self._mean = np.zeros(d)
        else:
            self._mean = np.array(initial_mean, dtype=float).reshape(d).copy()
        self._diag = np.ones(d)
        self._p_c = np.zeros(d)
        self._p_sigma = np.zeros(d)
        self._Z: np.ndarray | None = None

    # -- views --------------------------------------------------------------

    @property
    def mean(self) -> np.ndarray:
        return _readonly(self._mean)

    @property
    def sigma(self) -> float:
        return self._sigma

    @property
    def state(self) -> DiagonalState:
        return DiagonalState(
            mean=_readonly(self._mean),
            sigma=self._sigma,
            diag=_readonly(self._diag),
            boost=self.boost,
            path_c=_readonly(self._p_c),
            path_sigma=_readonly(self._p_sigma),
            c1=self.c1,
            c_mu=self.c_mu,
            c_sigma=float(self.c_sigma),
            d_sigma=float(self.d_sigma),
            c_c=float(self.c_c),
            mu_w=self.mu_w,
            t=self._t,
        )

    # -- ask/tell -----------------------------------------------------------

    def _propose(self) -> np.ndarray:
        z = self._rng.standard_normal((self._population, self._dim))
        self._Z = z
        return self._mean + self._sigma * (z * np.sqrt(self._diag))

    def _update(self, codes: np.ndarray, scores: np.ndarray) -> None:
        d = self._dim
        w = rank_weight(scores, self._mu)
        new_mean = codes.T @ w
        z_w = self._Z.T @ w

        cs = self.c_sigma
        self._p_sigma = (1.0 - cs) * self._p_sigma + np.sqrt(
            cs * (2.0 - cs) * self.mu_w
        ) * z_w
        next_t = self._t + 1
        norm_ps = np.linalg.norm(self._p_sigma)
        h_sigma = float(
            norm_ps / np.sqrt(1.0 - (1.0 - cs) ** (2 * next_t))
            < (1.4 + 2.0 / (d + 1.0)) * self.chi_d
        )

        cc = self.c_c
        y_w = (new_mean - self._mean) / self._sigma
        self._p_c = (1.0 - cc) * self._p_c + h_sigma * np.sqrt(
            cc * (2.0 - cc) * self.mu_w
        ) * y_w

        # Diagonal covariance update: decay toward the rank-one and rank-mu
        # per-coordinate squared contributions.
        order = np.argsort(-scores, kind="stable")[: self._mu]
        y_top = (codes[order] - self._mean) / self._sigma
        delta = (1.0 - h_sigma) * cc * (2.0 - cc)
        decay = 1.0 - self.c1 * (1.0 - delta) - self.c_mu
        self._diag = (
            decay * self._diag
            + self.c1 * self._p_c**2
            + self.c_mu * (self._w @ y_top**2)
        )

        self._mean = new_mean
        self._sigma *= np.exp((cs / self.d_sigma) * (norm_ps / self.chi_d - 1.0))

    # -- snapshots ----------------------------------------------------------

    def snapshot_config(self) -> dict:
        return {
            "dim": self._dim,
            "population": self._population,
            "sigma0": self.sigma0,
            "cutoff": self._mu,
            "c1": self.c1,
            "c_mu": self.c_mu,
            "c_sigma": float(self.c_sigma),
            "d_sigma": float(self.d_sigma),
            "c_c": float(self.c_c),
        }

    def snapshot_scalars(self) -> dict:
        return {"sigma": self._sigma}

    def snapshot_arrays(self) -> dict:
        return {
            "mean": self._mean,
            "diag": self._diag,
            "path_c": self._p_c,
            "path_sigma": self._p_sigma,
        }

    @classmethod
    def from_snapshot_parts(cls, config: dict, scalars: dict, arrays: dict, t: int):
        opt = cls(**config)
        opt._t = int(t)
        opt._sigma = float(scalars["sigma"])
        opt._mean = arrays["mean"].copy()
        opt._diag = arrays["diag"].copy()
        opt._p_c = arrays["path_c"].copy()
        opt._p_sigma = arrays["path_sigma"].copy()
        return opt
