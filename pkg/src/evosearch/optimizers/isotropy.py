"""Isotropy metrics of an optimizer's adapted covariance."""

from __future__ import annotations

from .base import UnsupportedOptimizerError
from .cholesky import CholeskyCMA, CholeskyState
from .diagonal import DiagonalCMA, DiagonalState

__all__ = ["isotropy_check"]


def isotropy_check(opt_or_state) -> tuple[float, float]:
    """Condition number and identity distance of the exploration covariance.

    Accepts a CholeskyCMA/DiagonalCMA optimizer or its state view and
    returns (kappa, delta) for the shape matrix C (step size excluded:
    the metrics compare C itself to the identity).

    Raises
    ------
    UnsupportedOptimizerError
        For optimizers with no adapted covariance (GA, RandomSearch,
        SphereCMA) or any other input.
    """
    from ..diagnostics import cov_metrics

    if isinstance(opt_or_state, CholeskyCMA):
        return cov_metrics(opt_or_state.state.factor, "cholesky")
    if isinstance(opt_or_state, CholeskyState):
        return cov_metrics(opt_or_state.factor, "cholesky")
    if isinstance(opt_or_state, DiagonalCMA):
        return cov_metrics(opt_or_state.state.diag, "diagonal")
    if isinstance(opt_or_state, DiagonalState):
        return cov_metrics(opt_or_state.diag, "diagonal")
    raise UnsupportedOptimizerError(
        f"{type(opt_or_state).__name__} exposes no adapted covariance"
    )
