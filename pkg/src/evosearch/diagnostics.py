"""Trajectory-geometry diagnostics.

Analyses applied to recorded search trajectories: PCA of per-generation mean
codes (with the exact theoretical random-walk spectrum to compare against),
cosine and Lissajous views of the principal projections, covariance isotropy
metrics, squared-norm growth fits, within-generation angular statistics, and
projections of evolution directions onto a curvature eigenframe with
shuffle-based null controls.

Everything here is a pure function of its inputs; nothing touches optimizer
internals.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.spatial.distance import pdist

__all__ = [
    "DegenerateTrajectoryError",
    "OutOfRangeError",
    "NotPositiveDefiniteError",
    "EmptyDirectionSetError",
    "FrameFormatError",
    "FitDivergedWarning",
    "MeanTrajectory",
    "PCADecomposition",
    "CosineFit",
    "EigenFrame",
    "AlignmentResult",
    "pca_mean_trajectory",
    "theoretical_expvar",
    "cosine_fit",
    "cov_metrics",
    "norm_growth_fit",
    "angular_stats",
    "eigenframe_projection",
    "shuffle_directions",
    "lissajous_project",
    "synthesize_frame",
    "save_frame",
    "load_frame",
]


class DegenerateTrajectoryError(ValueError):
    """All trajectory rows are identical; PCA has no variance to explain."""


class OutOfRangeError(ValueError):
    """Component index outside the valid range for this trajectory length."""


class NotPositiveDefiniteError(ValueError):
    """Covariance (or its factor) is not symmetric positive definite."""


class EmptyDirectionSetError(ValueError):
    """No direction vectors were supplied."""


class FrameFormatError(ValueError):
    """Eigenframe file is malformed or truncated."""


class FitDivergedWarning(UserWarning):
    """A least-squares fit failed to converge; best-effort values returned."""


# ---------------------------------------------------------------------------
# containers


@dataclass
class MeanTrajectory:
    """Per-generation mean codes of one run.

    Attributes
    ----------
    codes : ndarray, shape (T, d)
        Row t is the mean latent code of generation t.
    sigmas : ndarray or None, shape (T,)
        Per-generation step sizes, when the optimizer defines one.
    meta : dict
        Free-form run metadata (optimizer id, seed, ...).
    """

    codes: np.ndarray
    sigmas: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.codes = np.asarray(self.codes, dtype=float)
        if self.codes.ndim != 2 or self.codes.shape[0] < 2:
            raise ValueError(
                f"trajectory must be (T >= 2, d), got shape {self.codes.shape}"
            )
        if not np.all(np.isfinite(self.codes)):
            raise ValueError("trajectory contains non-finite entries")
        if self.sigmas is not None:
            self.sigmas = np.asarray(self.sigmas, dtype=float).ravel()
            if self.sigmas.shape[0] != self.codes.shape[0]:
                raise ValueError("sigmas length must match trajectory length")


@dataclass
class PCADecomposition:
    """Centered PCA of a mean trajectory.

    ``ratios`` covers the full spectrum (sums to 1); ``axes`` and
    ``projections`` are truncated to the leading components.
    """

    axes: np.ndarray         # (m, d), orthonormal rows
    ratios: np.ndarray       # (r,), non-negative, descending, sum 1
    projections: np.ndarray  # (T, m), trajectory projected on each axis


@dataclass
class CosineFit:
    """Fit of A*cos(2*pi*omega*(t/T + phi)) to one PC projection."""

    amplitude: float
    omega: float
    phase: float
    r2: float


@dataclass
class EigenFrame:
    """Top-k orthonormal eigenframe with descending eigenvalues.

    ``cutoff`` splits "informative" from "tail" dimensions in alignment
    statistics (default 800, matching typical metric-tensor usage).
    """

    basis: np.ndarray        # (k, d), orthonormal rows
    eigenvalues: np.ndarray  # (k,), descending
    cutoff: int = 800

    def __post_init__(self) -> None:
        self.basis = np.asarray(self.basis, dtype=float)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float).ravel()
        if self.basis.ndim != 2:
            raise ValueError(f"basis must be 2-D, got shape {self.basis.shape}")
        k, d = self.basis.shape
        if self.eigenvalues.shape[0] != k:
            raise ValueError(f"{self.eigenvalues.shape[0]} eigenvalues for {k} rows")
        if k > d:
            raise ValueError(f"more rows ({k}) than ambient dimensions ({d})")
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ValueError("eigenvalues must be non-increasing")
        gram = self.basis @ self.basis.T
        if not np.allclose(gram, np.eye(k), atol=1e-8):
            raise ValueError("basis rows are not orthonormal within 1e-8")
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def k(self) -> int:
        return self.basis.shape[0]


@dataclass
class AlignmentResult:
    """Eigenframe alignment of a set of evolution directions."""

    amplitudes: np.ndarray  # a_k = mean_i |u_k . z_i|, length k
    pearson_r: float        # corr(a_k, log eigenvalue_k), k <= cutoff
    pearson_p: float
    ks_stat: float          # KS two-sample: head vs tail amplitudes
    ks_p: float
    cutoff: int


# ---------------------------------------------------------------------------
# PCA of mean trajectories


def pca_mean_trajectory(traj) -> PCADecomposition:
    """Centered PCA of a (T, d) mean trajectory.

    Accepts a MeanTrajectory or a plain array.  Uses the T x T Gram matrix
    when d > T so memory stays O(T*d).  Axes and projections cover the top
    min(T-1, 30) components; ratios cover the whole spectrum.
    """
    x = traj.codes if isinstance(traj, MeanTrajectory) else np.asarray(traj, float)
    if x.ndim != 2:
        raise ValueError(f"trajectory must be 2-D, got shape {x.shape}")
    t_len, d = x.shape
    if t_len < 3:
        raise ValueError(f"PCA needs T >= 3 generations, got {t_len}")
    xc = x - x.mean(axis=0)
    total = float(np.sum(xc**2))
    if total == 0.0:
        raise DegenerateTrajectoryError("all trajectory rows are identical")

    n_keep = min(t_len - 1, 30)
    if d > t_len:
        # Gram route: eigendecompose X X^T instead of the d x d covariance.
        gram = xc @ xc.T
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        evecs = evecs[:, order]
        ratios = evals / evals.sum()
        svals = np.sqrt(evals[:n_keep])
        nonzero = svals > 1e-12 * svals[0]
        m = int(nonzero.sum())
        axes = (xc.T @ evecs[:, :m]) / svals[:m]
        axes = axes.T
        projections = evecs[:, :m] * svals[:m]
    else:
        u, s, vt = np.linalg.svd(xc, full_matrices=False)
        var = s**2
        ratios = var / var.sum()
        m = int(np.sum(s[:n_keep] > 1e-12 * s[0]))
        axes = vt[:m]
        projections = u[:, :m] * s[:m]

    r_full = min(t_len - 1, d)
    return PCADecomposition(
        axes=axes, ratios=ratios[:r_full], projections=projections
    )


def theoretical_expvar(k: int, T: int) -> float:
    """Theoretical explained-variance ratio of PC k for a T-step random walk.

    rho(k) = (1/2) * [1 - cos(pi*k/T)]^-1 / ((T^2 - 1)/6); the ratios over
    k = 1..T-1 sum to exactly 1, and for large T, rho(k) -> 6 / (pi^2 k^2).
    """
    k = int(k)
    T = int(T)
    if T < 2:
        raise OutOfRangeError(f"need T >= 2, got {T}")
    if not 1 <= k <= T - 1:
        raise OutOfRangeError(f"k must be in [1, {T - 1}], got {k}")
    return 0.5 / (1.0 - math.cos(math.pi * k / T)) / ((T * T - 1.0) / 6.0)


# ---------------------------------------------------------------------------
# cosine structure


def _cosine_sse(y: np.ndarray, phases: np.ndarray) -> tuple[float, float, float]:
    """Best linear fit y ~ a*cos(phases) + b*sin(phases); returns (sse, a, b)."""
    c = np.cos(phases)
    s = np.sin(phases)
    design = np.stack([c, s], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid), float(coef[0]), float(coef[1])


def cosine_fit(projection, k: int) -> CosineFit:
    """Least-squares cosine fit of one PC projection.

    Fits A*cos(2*pi*omega*(t/T + phi)) with omega searched in the window
    [k/2 - 1, k/2 + 1] (clipped below at 0.01) around the random-walk
    prediction omega = k/2.  Emits FitDivergedWarning and returns the best
    grid value when the refinement fails.
    """
    y = np.asarray(projection, dtype=float).ravel()
    t_len = y.size
    if t_len < 8:
        raise ValueError(f"cosine fit needs T >= 8 samples, got {t_len}")
    if k < 1:
        raise OutOfRangeError(f"k must be >= 1, got {k}")
    t_norm = np.arange(t_len) / t_len  # t/T

    lo = max(0.01, k / 2.0 - 1.0)
    hi = k / 2.0 + 1.0

    def sse_at(omega: float) -> float:
        return _cosine_sse(y, 2.0 * np.pi * omega * t_norm)[0]

    grid = np.linspace(lo, hi, 241)
    sse_grid = np.array([sse_at(w) for w in grid])
    best = int(np.argmin(sse_grid))
    omega = float(grid[best])

    # Refine inside the bracketing grid cells.
    blo = grid[max(0, best - 1)]
    bhi = grid[min(len(grid) - 1, best + 1)]
    try:
        res = optimize.minimize_scalar(sse_at, bounds=(blo, bhi), method="bounded")
        if res.success and np.isfinite(res.fun):
            # Keep whichever of grid point and refinement is better; an
            # exact grid hit that the refinement cannot beat is a success.
            if res.fun < sse_grid[best]:
                omega = float(res.x)
        else:
            warnings.warn(
                f"omega refinement did not converge near {omega:.4f}",
                FitDivergedWarning,
                stacklevel=2,
            )
    except Exception as exc:  # scipy failure: keep the grid value
        warnings.warn(
            f"omega refinement failed ({exc}); using grid minimum",
            FitDivergedWarning,
            stacklevel=2,
        )

    sse, a, b = _cosine_sse(y, 2.0 * np.pi * omega * t_norm)
    amplitude = math.hypot(a, b)
    # a*cos(x) + b*sin(x) = A*cos(x + psi), psi = atan2(-b, a); the model
    # writes the shift as 2*pi*omega*phi.
    psi = math.atan2(-b, a)
    phase = psi / (2.0 * np.pi * omega) if omega != 0 else 0.0
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        warnings.warn(
            "constant projection; R^2 undefined, reporting 0",
            FitDivergedWarning,
            stacklevel=2,
        )
        r2 = 0.0
    else:
        r2 = 1.0 - sse / sst
    return CosineFit(amplitude=amplitude, omega=omega, phase=phase, r2=r2)


# ---------------------------------------------------------------------------
# covariance metrics


def cov_metrics(c, representation: str = "dense") -> tuple[float, float]:
    """Condition number and relative identity distance of a covariance.

    kappa = lambda_max / lambda_min and
    delta = ||C - I||_F^2 / ||C||_F^2, both computed from the eigenvalues.

    ``representation`` selects the input form: "dense" (the d x d matrix
    itself), "cholesky" (a factor A with C = A A^T; eigenvalues are the
    squared singular values of A, so C is never materialized), or
    "diagonal" (the vector of diagonal entries).
    """
    if representation == "dense":
        mat = np.asarray(c, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"dense covariance must be square, got {mat.shape}")
        if not np.allclose(mat, mat.T, atol=1e-8 * max(1.0, float(np.abs(mat).max()))):
            raise NotPositiveDefiniteError("covariance is not symmetric")
        evals = np.linalg.eigvalsh(mat)
    elif representation == "cholesky":
        factor = np.asarray(c, dtype=float)
        if factor.ndim != 2 or factor.shape[0] != factor.shape[1]:
            raise ValueError(f"factor must be square, got {factor.shape}")
        svals = np.linalg.svd(factor, compute_uv=False)
        evals = svals**2
    elif representation == "diagonal":
        evals = np.asarray(c, dtype=float).ravel()
    else:
        raise ValueError(
            f"representation must be dense, cholesky, or diagonal, got {representation!r}"
        )
    if evals.size == 0 or evals.min() <= 0.0:
        raise NotPositiveDefiniteError(
            f"covariance has non-positive eigenvalue {evals.min() if evals.size else None}"
        )
    kappa = float(evals.max() / evals.min())
    delta = float(np.sum((evals - 1.0) ** 2) / np.sum(evals**2))
    return kappa, delta


# ---------------------------------------------------------------------------
# norm growth


def norm_growth_fit(traj) -> tuple[float, float, float]:
    """OLS fit of squared mean-code norm against generation index.

    Returns (slope, intercept, r^2).  A perfectly constant norm sequence is
    a perfect zero-slope fit (r^2 reported as 1).
    """
    x = traj.codes if isinstance(traj, MeanTrajectory) else np.asarray(traj, float)
    if x.ndim != 2 or x.shape[0] < 10:
        raise ValueError(f"norm growth fit needs a (T >= 10, d) trajectory, got {x.shape}")
    y = np.sum(x**2, axis=1)
    t = np.arange(x.shape[0], dtype=float)
    if np.ptp(y) == 0.0:
        return 0.0, float(y[0]), 1.0
    fit = stats.linregress(t, y)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


# ---------------------------------------------------------------------------
# within-generation angular statistics


def angular_stats(codes) -> tuple[float, float, float]:
    """Pairwise-geometry summary of one generation's codes.

    Returns (mean pairwise angle, mean pairwise euclidean distance, mean
    per-dimension sample std).  Pairs involving a zero vector have no
    defined angle; they are dropped from the angle average and reported via
    a warning (euclidean distances keep all pairs).
    """
    x = np.asarray(codes, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"angular stats need a (B >= 2, d) batch, got {x.shape}")
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0.0
    n_zero = int(zero.sum())
    if n_zero:
        warnings.warn(
            f"{n_zero} zero-norm codes: their pairs are excluded from the "
            "mean angle",
            stacklevel=2,
        )
    nz = x[~zero]
    if nz.shape[0] >= 2:
        unit = nz / np.linalg.norm(nz, axis=1, keepdims=True)
        gram = np.clip(unit @ unit.T, -1.0, 1.0)
        iu = np.triu_indices(nz.shape[0], k=1)
        mean_angle = float(np.arccos(gram[iu]).mean())
    else:
        mean_angle = float("nan")
    mean_l2 = float(pdist(x).mean())
    per_dim_std = float(np.std(x, axis=0, ddof=1).mean())
    return mean_angle, mean_l2, per_dim_std


# ---------------------------------------------------------------------------
# eigenframe alignment


def eigenframe_projection(directions, frame: EigenFrame) -> AlignmentResult:
    """Mean absolute projection of direction vectors onto each frame axis.

    Computes a_k = mean_i |u_k . z_i|, the Pearson correlation of a_k
    against log eigenvalue over the top ``frame.cutoff`` axes, and the
    two-sample Kolmogorov-Smirnov statistic between head (k <= cutoff) and
    tail (k > cutoff) amplitudes.
    """
    z = np.atleast_2d(np.asarray(directions, dtype=float))
    if z.size == 0 or z.shape[0] == 0:
        raise EmptyDirectionSetError("no direction vectors supplied")
    if z.shape[1] != frame.dim:
        raise ValueError(
            f"directions have dimension {z.shape[1]}, frame expects {frame.dim}"
        )
    cutoff = frame.cutoff
    if cutoff >= frame.k:
        raise ValueError(
            f"cutoff {cutoff} leaves no tail axes (frame has {frame.k})"
        )
    amplitudes = np.abs(z @ frame.basis.T).mean(axis=0)
    head = amplitudes[:cutoff]
    lam = frame.eigenvalues[:cutoff]
    if lam.min() <= 0.0:
        raise ValueError("eigenvalues above the cutoff must be positive for log")
    pearson = stats.pearsonr(head, np.log(lam))
    ks = stats.ks_2samp(head, amplitudes[cutoff:])
    return AlignmentResult(
        amplitudes=amplitudes,
        pearson_r=float(pearson.statistic),
        pearson_p=float(pearson.pvalue),
        ks_stat=float(ks.statistic),
        ks_p=float(ks.pvalue),
        cutoff=cutoff,
    )


def shuffle_directions(directions, rng) -> np.ndarray:
    """Independently permute the entries of each direction vector.

    Exactly preserves every vector's entry multiset and norm; used to build
    null distributions for alignment statistics.
    """
    z = np.atleast_2d(np.asarray(directions, dtype=float))
    if z.shape[0] == 0:
        raise EmptyDirectionSetError("no direction vectors supplied")
    return rng.permuted(z, axis=1)


# ---------------------------------------------------------------------------
# lissajous


def lissajous_project(pca: PCADecomposition, i: int, j: int) -> np.ndarray:
    """Pair the projections on PCs i and j (1-based) as a (T, 2) curve."""
    m = pca.projections.shape[1]
    if not (1 <= i <= m and 1 <= j <= m):
        raise OutOfRangeError(f"PC indices must be in [1, {m}], got ({i}, {j})")
    return np.stack([pca.projections[:, i - 1], pca.projections[:, j - 1]], axis=1)


# ---------------------------------------------------------------------------
# eigenframe synthesis and file I/O


def synthesize_frame(
    dim: int, k: int, condition: float = 1e6, cutoff: int = 800, seed=None
) -> EigenFrame:
    """Random orthonormal frame with a log-linear eigenvalue spectrum.

    Eigenvalues run from 1 down to 1/condition in k log-linear steps; the
    basis is the Q factor of a Gaussian matrix, so the frame is uniformly
    random. Deterministic per seed.
    """
    if not 1 <= k <= dim:
        raise ValueError(f"need 1 <= k <= dim, got k={k} dim={dim}")
    if condition < 1.0:
        raise ValueError(f"condition must be >= 1, got {condition}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, k)))
    # Fix signs so the frame is a deterministic function of the Gaussian draw.
    q *= np.sign(np.diag(r))
    eigenvalues = np.logspace(0.0, -math.log10(condition), k)
    return EigenFrame(basis=q.T, eigenvalues=eigenvalues, cutoff=cutoff)


_FRAME_HEADER = re.compile(rb"^EIGENFRAME v1 d=(\d+) k=(\d+)\n$")


def save_frame(frame: EigenFrame, path) -> None:
    """Write an eigenframe file: text header line, then little-endian f64
    eigenvalues followed by the row-major basis."""
    with open(path, "wb") as fh:
        fh.write(f"EIGENFRAME v1 d={frame.dim} k={frame.k}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(frame.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(frame.basis, dtype="<f8").tobytes())


def load_frame(path, cutoff: int | None = None) -> EigenFrame:
    """Read an eigenframe file written by save_frame."""
    with open(path, "rb") as fh:
        header = fh.readline(64)
        match = _FRAME_HEADER.match(header)
        if not match:
            raise FrameFormatError(f"bad eigenframe header {header!r}")
        d = int(match.group(1))
        k = int(match.group(2))
        body = fh.read()
    expected = 8 * (k + k * d)
    if len(body) != expected:
        raise FrameFormatError(
            f"expected {expected} payload bytes for d={d} k={k}, got {len(body)}"
        )
    eigenvalues = np.frombuffer(body, dtype="<f8", count=k).astype(float)
    basis = (
        np.frombuffer(body, dtype="<f8", count=k * d, offset=8 * k)
        .astype(float)
        .reshape(k, d)
    )
    kwargs = {} if cutoff is None else {"cutoff": cutoff}
    return EigenFrame(basis=basis, eigenvalues=eigenvalues, **kwargs)
