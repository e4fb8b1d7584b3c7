"""Evolution strategy searching a fixed-radius hypersphere.

The search never leaves the sphere of radius R: each generation proposes the
current center plus B-1 points reached by the exponential map along random
tangent directions at a decaying angular step, and the center moves by
spherical extrapolation (slerp with ratio > 1) toward the rank-weighted mean
of the scored batch.  Generation 0 has no center yet; the batch is B
isotropic points of norm R and the first of them doubles as the center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import (
    DecaySchedule,
    SphereParams,
    ZeroVectorError,
    decay_eval,
    default_radius,
    exp_map,
    rank_weight,
    slerp,
    tangent_project,
)
from .base import AskTellOptimizer, ProtocolViolationError

__all__ = ["SphereState", "SphereCMA"]


@dataclass
class SphereState:
    """Read-only view of a SphereCMA's state."""

    params: SphereParams
    schedule: DecaySchedule
    center: np.ndarray  # m_t, norm R
    t: int


def _readonly(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.flags.writeable = False
    return v


class SphereCMA(AskTellOptimizer):
    """Sphere-constrained ask/tell optimizer with angular step decay.

    Parameters
    ----------
    dim : int
        Ambient dimension d.
    population : int
        Batch size B. Default 40.
    radius : float or None
        Sphere radius R; None selects the default ratio to the Gaussian
        shell (300 at d=4096).
    schedule : DecaySchedule or None
        Angular step size mu(t); None selects the exponential default.
    learning_ratio : float
        Slerp extrapolation ratio for the center update. Default 1.5.
    cutoff : int or None
        Top-K count for rank weights; default floor(B/2).
    """

    kind = "sphere"
    kind_code = 3

    def __init__(
        self,
        dim: int,
        population: int = 40,
        radius: float | None = None,
        schedule: DecaySchedule | None = None,
        learning_ratio: float = 1.5,
        cutoff: int | None = None,
        seed=None,
    ):
        super().__init__(dim, population, seed)
        r = default_radius(dim) if radius is None else float(radius)
        self.params = SphereParams(
            radius=r,
            dim=self._dim,
            population=self._population,
            learning_ratio=float(learning_ratio),
            cutoff=0 if cutoff is None else int(cutoff),
        )
        self.schedule = (
            DecaySchedule.exponential() if schedule is None else schedule
        )
        self._center: np.ndarray | None = None

    # -- views --------------------------------------------------------------

    @property
    def mean(self) -> np.ndarray | None:
        """Current center m_t (None before the first proposal)."""
        return None if self._center is None else _readonly(self._center)

    @property
    def sigma(self) -> float:
        """Angular step size the next proposal will use, in radians."""
        return decay_eval(self.schedule, self._t)

    @property
    def state(self) -> SphereState:
        if self._center is None:
            raise ProtocolViolationError(
                "no center exists before the first ask()"
            )
        return SphereState(
            params=self.params,
            schedule=self.schedule,
            center=_readonly(self._center),
            t=self._t,
        )

    # -- ask/tell -----------------------------------------------------------

    def _propose(self) -> np.ndarray:
        b, d, r = self._population, self._dim, self.params.radius
        if self._t == 0 and self._center is None:
            batch = self._rng.standard_normal((b, d))
            batch *= r / np.linalg.norm(batch, axis=1, keepdims=True)
            # The first isotropic sample doubles as the initial center.
            self._center = batch[0].copy()
            return batch
        mu = decay_eval(self.schedule, self._t)
        u = self._rng.standard_normal((b, d))
        v = tangent_project(u, self._center)
        batch = exp_map(self._center, v, mu)
        batch[0] = self._center
        return batch

    def _update(self, codes: np.ndarray, scores: np.ndarray) -> None:
        r = self.params.radius
        w = rank_weight(scores, self.params.cutoff)
        m_w = codes.T @ w
        norm = np.linalg.norm(m_w)
        if norm <= 1e-12 * r:
            raise ZeroVectorError(
                "weighted sample mean collapsed to zero; no arc direction"
            )
        m_w *= r / norm
        new_center = slerp(codes[0], m_w, self.params.learning_ratio)
        # Renormalize to hold the radius invariant against fp drift.
        self._center = new_center * (r / np.linalg.norm(new_center))

    # -- snapshots ----------------------------------------------------------

    def snapshot_config(self) -> dict:
        return {
            "dim": self._dim,
            "population": self._population,
            "radius": self.params.radius,
            "learning_ratio": self.params.learning_ratio,
            "cutoff": self.params.cutoff,
            "schedule_kind": self.schedule.kind,
            "schedule_mu0": self.schedule.mu0,
            "schedule_mu_min": self.schedule.mu_min,
            "schedule_tau": self.schedule.tau,
        }

    def snapshot_arrays(self) -> dict:
        center = np.zeros(0) if self._center is None else self._center
        return {"center": center}

    @classmethod
    def from_snapshot_parts(cls, config: dict, scalars: dict, arrays: dict, t: int):
        opt = cls(
            dim=config["dim"],
            population=config["population"],
            radius=config["radius"],
            schedule=DecaySchedule(
                config["schedule_kind"],
                config["schedule_mu0"],
                config["schedule_mu_min"],
                config["schedule_tau"],
            ),
            learning_ratio=config["learning_ratio"],
            cutoff=config["cutoff"],
        )
        opt._t = int(t)
        center = arrays["center"]
        opt._center = None if center.size == 0 else center.copy()
        return opt
