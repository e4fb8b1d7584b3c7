"""Evolution-strategy search toolkit for high-dimensional latent spaces.

Subpackages and modules:

* ``geometry``     -- sphere primitives (exponential map, slerp, rank
  weighting, tangent projection) and angular step-size decay schedules.
* ``optimizers``   -- ask/tell optimizers: SphereCMA, Cholesky-CMA-ES,
  DiagonalCMA, a classic genetic algorithm, and random search.
* ``objectives``   -- synthetic ill-conditioned quadric landscapes, the
  multiplicative-noise score model, and score normalization.
* ``extern``       -- newline-delimited JSON protocol for scoring codes in an
  external subprocess.
* ``diagnostics``  -- trajectory-geometry analyses: PCA of mean trajectories,
  cosine fits, covariance metrics, norm-growth fits, eigenframe alignment.
* ``harness``      -- benchmark grid runner, statistics, CSV/report emission,
  and the command-line interface.
"""

__version__ = "0.1.0"
