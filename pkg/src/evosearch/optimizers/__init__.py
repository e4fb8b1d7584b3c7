"""Ask/tell optimizers: full, diagonal, and sphere-constrained evolution
strategies plus GA and random-search baselines.

All optimizers maximize, propose fixed-size batches, and are deterministic
given (seed, config, score sequence).  State snapshots (EVOS format) allow
bitwise-identical resume; see ``snapshot``.
"""

from .base import (
    AskTellOptimizer,
    NonFiniteScoreError,
    ProtocolViolationError,
    ShapeMismatchError,
    UnsupportedOptimizerError,
    as_generator,
)
from .cholesky import CholeskyCMA, CholeskyState
from .diagonal import DiagonalCMA, DiagonalState
from .ga import GA, GAParams, selection_probs
from .isotropy import isotropy_check
from .random_search import RandomSearch
from .snapshot import SnapshotFormatError, dump_state, load_state, save_state
from .sphere import SphereCMA, SphereState

__all__ = [
    "AskTellOptimizer",
    "ProtocolViolationError",
    "ShapeMismatchError",
    "NonFiniteScoreError",
    "UnsupportedOptimizerError",
    "as_generator",
    "CholeskyCMA",
    "CholeskyState",
    "DiagonalCMA",
    "DiagonalState",
    "SphereCMA",
    "SphereState",
    "GA",
    "GAParams",
    "selection_probs",
    "RandomSearch",
    "isotropy_check",
    "SnapshotFormatError",
    "save_state",
    "load_state",
    "dump_state",
]
