"""Sphere primitives and angular step-size schedules.

All search-sphere operations live here: the exponential map that carries a
tangent vector onto the sphere, spherical linear interpolation/extrapolation
(slerp) along a great-circle arc, log-rank recombination weights, projection
onto the tangent space of a base point, and the decay schedules that shrink
the angular step size over generations.

Every function is pure and accepts plain numpy arrays.  Only the sphere of
fixed radius embedded in R^d is supported; this is not a general
Riemannian-manifold toolkit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ZeroVectorError",
    "NotTangentError",
    "NormMismatchError",
    "DegenerateArcError",
    "EmptyScoresError",
    "SphereParams",
    "DecaySchedule",
    "default_radius",
    "exp_map",
    "slerp",
    "rank_weight",
    "tangent_project",
    "decay_eval",
]

# Gaussian shell ratio: radius 300 at d=4096.
_RADIUS_PER_SQRT_DIM = 300.0 / 64.0


class ZeroVectorError(ValueError):
    """A base or tangent vector has zero norm where a direction is required."""


class NotTangentError(ValueError):
    """Tangent-vector argument is not orthogonal to the base point."""


class NormMismatchError(ValueError):
    """Slerp endpoints do not lie on the same sphere."""


class DegenerateArcError(ValueError):
    """Slerp endpoints are antipodal; the connecting arc is not unique."""


class EmptyScoresError(ValueError):
    """Rank weighting needs at least one score."""


def default_radius(dim: int) -> float:
    """Search-sphere radius for dimension ``dim``.

    Standard-normal latent codes concentrate on a shell of radius ~sqrt(d);
    the default keeps the ratio that puts the radius at 300 for d=4096.
    """
    return _RADIUS_PER_SQRT_DIM * math.sqrt(dim)


@dataclass(frozen=True)
class SphereParams:
    """Static configuration of a fixed-radius sphere search.

    Attributes
    ----------
    radius : float
        Norm of every point on the search sphere.
    dim : int
        Ambient dimension d.
    population : int
        Batch size B proposed per generation.
    learning_ratio : float
        Arc extrapolation ratio applied to the center update (>1 overshoots
        the weighted mean).
    cutoff : int
        Number K of top-ranked candidates that receive positive weight.
        Defaults to floor(B/2), at least 1.
    """

    radius: float
    dim: int
    population: int
    learning_ratio: float = 1.5
    cutoff: int = field(default=0)

    def __post_init__(self) -> None:
        if self.cutoff == 0:
            object.__setattr__(self, "cutoff", max(1, self.population // 2))
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.population < 1:
            raise ValueError(f"population must be >= 1, got {self.population}")
        if not 1 <= self.cutoff <= self.population:
            raise ValueError(
                f"cutoff must satisfy 1 <= K <= B, got K={self.cutoff} B={self.population}"
            )
        if self.learning_ratio <= 0:
            raise ValueError(f"learning_ratio must be positive, got {self.learning_ratio}")


@dataclass(frozen=True)
class DecaySchedule:
    """Monotone non-increasing angular step size mu(t).

    ``exponential``: mu(t) = mu_min + (mu0 - mu_min) * exp(-t / tau)
    ``inverse``:     mu(t) = mu0 / (1 + t / tau)

    The default constants are a calibration choice (the tuned values are not
    published); they qualitatively track the within-generation angular spread
    declining from ~1.57 rad toward ~0.5 rad over a 75-generation run, and
    every field is user-overridable.
    """

    kind: str
    mu0: float
    mu_min: float
    tau: float

    def __post_init__(self) -> None:
        if self.kind not in ("exponential", "inverse"):
            raise ValueError(f"kind must be 'exponential' or 'inverse', got {self.kind!r}")
        if not 0 < self.mu0 < math.pi:
            raise ValueError(f"mu0 must lie in (0, pi), got {self.mu0}")
        if not 0 <= self.mu_min < self.mu0:
            raise ValueError(f"need mu0 > mu_min >= 0, got mu0={self.mu0} mu_min={self.mu_min}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @classmethod
    def exponential(cls, mu0: float = 0.4, mu_min: float = 0.05, tau: float = 25.0) -> "DecaySchedule":
        return cls("exponential", mu0, mu_min, tau)

    @classmethod
    def inverse(cls, mu0: float = 0.4, tau: float = 10.0) -> "DecaySchedule":
        return cls("inverse", mu0, 0.0, tau)

    def __call__(self, t: int) -> float:
        return decay_eval(self, t)


def decay_eval(schedule: DecaySchedule, t: int) -> float:
    """Angular step size at generation ``t`` (t >= 0), in radians."""
    if t < 0:
        raise ValueError(f"generation must be >= 0, got {t}")
    if schedule.kind == "exponential":
        return schedule.mu_min + (schedule.mu0 - schedule.mu_min) * math.exp(-t / schedule.tau)
    return schedule.mu0 / (1.0 + t / schedule.tau)


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        raise ValueError(f"{name} must be a vector, got a scalar")
    return arr


def exp_map(m, v, mu: float) -> np.ndarray:
    """Travel angle ``mu`` from base point ``m`` toward tangent direction ``v``.

    Returns ``R * (m_hat * cos(mu) + v_hat * sin(mu))`` with ``R = ||m||``,
    which stays on the sphere of radius R.  ``v`` may be a single tangent
    vector of shape (d,) or a stack of shape (n, d); the result matches the
    shape of ``v``.

    Raises
    ------
    ZeroVectorError
        If ``m`` or any row of ``v`` has zero norm.
    NotTangentError
        If ``m . v`` exceeds 1e-8 * ||m|| * ||v|| for any row.
    """
    m = _as_float_array(m, "m")
    v = _as_float_array(v, "v")
    radius = float(np.linalg.norm(m))
    if radius == 0.0:
        raise ZeroVectorError("base point m has zero norm")
    v2 = np.atleast_2d(v)
    vnorm = np.linalg.norm(v2, axis=1)
    if np.any(vnorm == 0.0):
        raise ZeroVectorError("tangent vector v has zero norm")
    dots = np.abs(v2 @ m)
    if np.any(dots > 1e-8 * radius * vnorm):
        worst = float(np.max(dots / (radius * vnorm)))
        raise NotTangentError(f"v is not tangent to m: |m.v|/(|m||v|) = {worst:.3e}")
    out = radius * (np.cos(mu) * (m / radius) + np.sin(mu) * (v2 / vnorm[:, None]))
    return out if v.ndim == 2 else out[0]


def slerp(m, p, t: float) -> np.ndarray:
    """Spherical linear interpolation/extrapolation from ``m`` toward ``p``.

    q = (sin((1-t)*theta) * m + sin(t*theta) * p) / sin(theta) with
    theta = arccos(m_hat . p_hat).  t in [0, 1] interpolates; t > 1
    extrapolates along the same great-circle arc.  The result keeps the
    common norm of the endpoints.

    Raises
    ------
    ZeroVectorError
        If either endpoint has zero norm.
    NormMismatchError
        If ||m|| and ||p|| differ by more than 1e-8 relative.
    DegenerateArcError
        If the endpoints are antipodal (theta > pi - 1e-6); for a
        near-degenerate arc (theta < 1e-9) ``m`` is returned unchanged.
    """
    m = _as_float_array(m, "m")
    p = _as_float_array(p, "p")
    nm = float(np.linalg.norm(m))
    np_ = float(np.linalg.norm(p))
    if nm == 0.0 or np_ == 0.0:
        raise ZeroVectorError("slerp endpoints must have positive norm")
    if abs(nm - np_) > 1e-8 * max(nm, np_):
        raise NormMismatchError(f"endpoint norms differ: {nm!r} vs {np_!r}")
    cos_theta = float(np.clip(np.dot(m, p) / (nm * np_), -1.0, 1.0))
    theta = math.acos(cos_theta)
    if theta < 1e-9:
        return m.copy()
    if theta > math.pi - 1e-6:
        raise DegenerateArcError("antipodal endpoints: great-circle arc is not unique")
    return (math.sin((1.0 - t) * theta) * m + math.sin(t * theta) * p) / math.sin(theta)


def rank_weight(scores, cutoff: int | None = None) -> np.ndarray:
    """Log-rank recombination weights over a population of scores.

    The K top-scoring candidates receive raw weight log(K + 1/2) - log(rank)
    (rank 1 = best), all others zero; weights are normalized to sum to one and
    returned in input order.  Equal scores are ranked by ascending input
    index, which keeps runs deterministic.

    ``cutoff`` defaults to floor(B/2), at least 1.
    """
    s = np.asarray(scores, dtype=float).ravel()
    b = s.size
    if b == 0:
        raise EmptyScoresError("rank_weight needs at least one score")
    k = max(1, b // 2) if cutoff is None else int(cutoff)
    if not 1 <= k <= b:
        raise ValueError(f"cutoff must satisfy 1 <= K <= B, got K={k} B={b}")
    # Stable sort on negated scores: descending by score, ties by input index.
    order = np.argsort(-s, kind="stable")
    raw = np.zeros(b)
    raw[:k] = np.log(k + 0.5) - np.log(np.arange(1, k + 1))
    raw /= raw.sum()
    weights = np.zeros(b)
    weights[order] = raw
    return weights


def tangent_project(u, m) -> np.ndarray:
    """Remove from ``u`` its component along the base point ``m``.

    v = u - m * (m . u) / ||m||^2, so that m . v = 0.  ``u`` may be a single
    vector of shape (d,) or a stack of shape (n, d).
    """
    u = _as_float_array(u, "u")
    m = _as_float_array(m, "m")
    norm2 = float(np.dot(m, m))
    if norm2 == 0.0:
        raise ZeroVectorError("base point m has zero norm")
    u2 = np.atleast_2d(u)
    out = u2 - np.outer(u2 @ m, m) / norm2
    return out if u.ndim == 2 else out[0]
