"""Rank-one Cholesky-factor CMA-ES with deferred factor updates.

Samples candidates from N(m_t, sigma_t^2 * A A^T) and adapts mean, step size
and covariance from ranked scores.  The covariance is never materialized:
the factor A and its inverse are stored and modified directly by exact
rank-one updates, so a full run costs O(d^2) per generation with no
factorization.  Factor updates are buffered and applied every
``update_freq`` generations (default 10); between applications the sampler
uses the last applied factor, which is the deferral the update-frequency
knob controls.

The factor starts as the identity and the rank-one update does not keep it
triangular; A is a general square root of the covariance (A A^T = C), which
is all the sampling and adaptation math requires.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import rank_weight
from .base import AskTellOptimizer

__all__ = ["CholeskyState", "CholeskyCMA"]


@dataclass
class CholeskyState:
    """Read-only view of a CholeskyCMA's adaptive state.

    Arrays are views of live optimizer memory, marked non-writable.
    """

    mean: np.ndarray         # m_t, shape (d,)
    sigma: float             # sigma_t
    factor: np.ndarray       # A, shape (d, d); A A^T = C
    inv_factor: np.ndarray   # A^-1
    path_c: np.ndarray       # covariance evolution path p_c
    path_sigma: np.ndarray   # conjugate step-size path p_sigma
    c1: float                # rank-one covariance learning rate
    c_mu: float              # rank-mu covariance learning rate (0 = off)
    c_sigma: float           # step-size path learning rate
    d_sigma: float           # step-size damping
    c_c: float               # covariance path learning rate
    mu_w: float              # variance-effective selection mass
    update_freq: int         # generations between factor applications
    t: int                   # completed generations


def _readonly(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.flags.writeable = False
    return v


class CholeskyCMA(AskTellOptimizer):
    """(mu/mu_w, lambda) evolution strategy on a direct Cholesky factor.

    Parameters
    ----------
    dim : int
        Search dimension d.
    population : int
        Batch size B (lambda). Default 40.
    sigma0 : float
        Initial step size. Default 3.0.
    update_freq : int
        Apply the buffered factor updates every this many generations.
        Default 10.
    cutoff : int or None
        Number mu of top-ranked candidates recombined; default floor(B/2).
    c1, c_mu, c_sigma, d_sigma, c_c : float or None
        Learning rates; None selects the standard dimension-dependent
        defaults.  c_mu defaults to 0 (rank-one-only updates, per the
        direct-factor scheme); a positive value adds rank-mu terms as
        additional exact rank-one factor updates.
    initial_mean : array or None
        Starting center m_0; default the origin.  Supplying the mean of
        externally chosen codes mirrors seeding a run from references.
    seed : int, Generator, or None
        RNG source.
    """

    kind = "cholesky"
    kind_code = 1

    def __init__(
        self,
        dim: int,
        population: int = 40,
        sigma0: float = 3.0,
        update_freq: int = 10,
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
        if update_freq < 1:
            raise ValueError(f"update_freq must be >= 1, got {update_freq}")
        d = self._dim
        b = self._population
        self._mu = max(1, b // 2) if cutoff is None else int(cutoff)
        if not 1 <= self._mu <= b:
            raise ValueError(f"cutoff must satisfy 1 <= mu <= B, got {self._mu}")

        # Recombination weights on ranks 1..mu (same log-rank scheme used for
        # all rank-based recombination in this package).
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
        self.c1 = float(c1) if c1 is not None else 2.0 / ((d + 1.3) ** 2 + self.mu_w)
        self.c_mu = float(c_mu) if c_mu is not None else 0.0
        if self.c1 < 0 or self.c_mu < 0 or self.c1 + self.c_mu > 1:
            raise ValueError(
                f"need c1, c_mu >= 0 and c1 + c_mu <= 1, got {self.c1}, {self.c_mu}"
            )
        # E||N(0, I_d)||, for step-size control.
        self.chi_d = np.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d**2))

        self.sigma0 = float(sigma0)
        self.update_freq = int(update_freq)
        self._sigma = float(sigma0)
        if initial_mean is None:
            self._mean = np.zeros(d)
        else:
            self._mean = np.array(initial_mean, dtype=float).reshape(d).copy()
        self._A = np.eye(d)
        self._A_inv = np.eye(d)
        self._p_c = np.zeros(d)
        self._p_sigma = np.zeros(d)
        self._Z: np.ndarray | None = None
        # Per-generation buffered factor inputs, applied every update_freq.
        self._pending_pc: list[np.ndarray] = []
        self._pending_hsig: list[float] = []
        self._pending_y: list[np.ndarray] = []  # only filled when c_mu > 0

    # -- views --------------------------------------------------------------

    @property
    def mean(self) -> np.ndarray:
        return _readonly(self._mean)

    @property
    def sigma(self) -> float:
        return self._sigma

    @property
    def state(self) -> CholeskyState:
        return CholeskyState(
            mean=_readonly(self._mean),
            sigma=self._sigma,
            factor=_readonly(self._A),
            inv_factor=_readonly(self._A_inv),
            path_c=_readonly(self._p_c),
            path_sigma=_readonly(self._p_sigma),
            c1=self.c1,
            c_mu=self.c_mu,
            c_sigma=float(self.c_sigma),
            d_sigma=float(self.d_sigma),
            c_c=float(self.c_c),
            mu_w=self.mu_w,
            update_freq=self.update_freq,
            t=self._t,
        )

    # -- ask/tell -----------------------------------------------------------

    def _propose(self) -> np.ndarray:
        z = self._rng.standard_normal((self._population, self._dim))
        self._Z = z
        return self._mean + self._sigma * (z @ self._A.T)

    def _update(self, codes: np.ndarray, scores: np.ndarray) -> None:
        d = self._dim
        w = rank_weight(scores, self._mu)  # per-index weights, sum 1
        new_mean = codes.T @ w
        z_w = self._Z.T @ w

        # Step-size path in the isotropic frame.
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

        # Covariance path in the sampling frame.
        cc = self.c_c
        y_w = (new_mean - self._mean) / self._sigma
        self._p_c = (1.0 - cc) * self._p_c + h_sigma * np.sqrt(
            cc * (2.0 - cc) * self.mu_w
        ) * y_w

        self._pending_pc.append(self._p_c.copy())
        self._pending_hsig.append(h_sigma)
        if self.c_mu > 0.0:
            order = np.argsort(-scores, kind="stable")[: self._mu]
            self._pending_y.append((codes[order] - self._mean) / self._sigma)

        self._mean = new_mean
        self._sigma *= np.exp((cs / self.d_sigma) * (norm_ps / self.chi_d - 1.0))

        if next_t % self.update_freq == 0:
            self._apply_factor_updates()

    # -- factor maintenance --------------------------------------------------

    def _rank_one_add(self, beta: float, v: np.ndarray) -> None:
        """Exact factor update for C <- C + beta * v v^T."""
        z = self._A_inv @ v
        n2 = float(z @ z)
        if n2 <= 0.0 or beta == 0.0:
            return
        u = np.sqrt(1.0 + beta * n2)
        self._A += ((u - 1.0) / n2) * np.outer(v, z)
        self._A_inv -= ((u - 1.0) / (u * n2)) * np.outer(z, z @ self._A_inv)

    def _apply_factor_updates(self) -> None:
        """Apply buffered per-generation covariance updates to A and A^-1.

        Each buffered generation contributes C <- alpha*C + c1*p_c p_c^T
        (+ rank-mu terms when c_mu > 0), realized as a scalar factor scaling
        plus exact rank-one updates; cost O(d^2) per term.
        """
        for i, (pc, hs) in enumerate(zip(self._pending_pc, self._pending_hsig)):
            delta = (1.0 - hs) * self.c_c * (2.0 - self.c_c)
            alpha = 1.0 - self.c1 * (1.0 - delta) - self.c_mu
            root = np.sqrt(alpha)
            self._A *= root
            self._A_inv /= root
            self._rank_one_add(self.c1, pc)
            if self.c_mu > 0.0:
                for j, y in enumerate(self._pending_y[i]):
                    self._rank_one_add(self.c_mu * self._w[j], y)
        self._pending_pc.clear()
        self._pending_hsig.clear()
        self._pending_y.clear()

    # -- snapshots ----------------------------------------------------------

    def snapshot_config(self) -> dict:
        return {
            "dim": self._dim,
            "population": self._population,
            "sigma0": self.sigma0,
            "update_freq": self.update_freq,
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
        arrays = {
            "mean": self._mean,
            "factor": self._A,
            "inv_factor": self._A_inv,
            "path_c": self._p_c,
            "path_sigma": self._p_sigma,
            "pending_pc": (
                np.stack(self._pending_pc)
                if self._pending_pc
                else np.zeros((0, self._dim))
            ),
            "pending_hsig": np.asarray(self._pending_hsig, dtype=float),
        }
        if self._pending_y:
            arrays["pending_y"] = np.stack(self._pending_y)
        return arrays

    @classmethod
    def from_snapshot_parts(cls, config: dict, scalars: dict, arrays: dict, t: int):
        opt = cls(**config)
        opt._t = int(t)
        opt._sigma = float(scalars["sigma"])
        opt._mean = arrays["mean"].copy()
        opt._A = arrays["factor"].copy()
        opt._A_inv = arrays["inv_factor"].copy()
        opt._p_c = arrays["path_c"].copy()
        opt._p_sigma = arrays["path_sigma"].copy()
        opt._pending_pc = [row.copy() for row in arrays["pending_pc"]]
        opt._pending_hsig = [float(x) for x in arrays["pending_hsig"]]
        if "pending_y" in arrays:
            opt._pending_y = [block.copy() for block in arrays["pending_y"]]
        return opt
