"""Ask/tell protocol base class and optimizer errors.

Every optimizer follows the same loop: ``ask()`` proposes a batch of B
candidate vectors for the current generation, ``tell(codes, scores)`` feeds
back one finite score per candidate and advances the internal state.  The
base class enforces strict alternation, constant batch size, score
validation, and seeded determinism; concrete optimizers implement only
``_propose`` and ``_update``.

Determinism contract: two optimizers constructed with the same seed and
configuration, fed the same score sequences, emit bitwise-identical batches.
RNG streams are counter-based (Philox) so a harness can derive many
independent per-run streams cheaply.
"""

from __future__ import annotations

from typing import ClassVar

import numpy as np

__all__ = [
    "ProtocolViolationError",
    "ShapeMismatchError",
    "NonFiniteScoreError",
    "UnsupportedOptimizerError",
    "AskTellOptimizer",
    "as_generator",
]


class ProtocolViolationError(RuntimeError):
    """Ask/tell called out of order, or told codes that were never proposed."""


class ShapeMismatchError(ValueError):
    """Batch of codes or scores has the wrong shape for this run."""


class NonFiniteScoreError(ValueError):
    """A score is NaN or infinite."""


class UnsupportedOptimizerError(TypeError):
    """The optimizer does not expose the queried quantity (e.g. a covariance)."""


def as_generator(seed) -> np.random.Generator:
    """Build a counter-based random Generator from ``seed``.

    Accepts an existing Generator (used as-is), or any value accepted by
    ``np.random.SeedSequence`` (int, sequence of ints, None for fresh
    entropy).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


class AskTellOptimizer:
    """Base class for batch black-box optimizers (maximization).

    Parameters
    ----------
    dim : int
        Dimension d of the search space.
    population : int
        Batch size B proposed per generation.
    seed : int, sequence of ints, Generator, or None
        Source of all randomness for this instance.

    Notes
    -----
    Instances are single-threaded: one optimizer must not be shared between
    concurrently running loops (it may be handed off between threads at
    generation boundaries).
    """

    kind: ClassVar[str] = "abstract"
    kind_code: ClassVar[int] = 0

    def __init__(self, dim: int, population: int, seed=None):
        dim = int(dim)
        population = int(population)
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if population < 1:
            raise ValueError(f"population must be >= 1, got {population}")
        self._dim = dim
        self._population = population
        self._rng = as_generator(seed)
        self._t = 0
        self._pending: np.ndarray | None = None

    # -- read-only views ----------------------------------------------------

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def population(self) -> int:
        return self._population

    @property
    def generation(self) -> int:
        """Number of completed ask/tell cycles."""
        return self._t

    @property
    def mean(self) -> np.ndarray | None:
        """Current distribution mean / search center, where defined."""
        return None

    @property
    def sigma(self) -> float | None:
        """Current step size, where defined."""
        return None

    # -- protocol -----------------------------------------------------------

    def ask(self) -> np.ndarray:
        """Propose a (B, d) batch of candidate codes for this generation."""
        if self._pending is not None:
            raise ProtocolViolationError(
                "ask() called twice without an intervening tell()"
            )
        batch = np.ascontiguousarray(self._propose(), dtype=float)
        if batch.shape != (self._population, self._dim):
            raise ShapeMismatchError(
                f"internal proposal shape {batch.shape} != "
                f"({self._population}, {self._dim})"
            )
        self._pending = batch
        return batch.copy()

    def tell(self, codes, scores) -> None:
        """Consume scores for the last asked batch and advance one generation.

        ``codes`` must be exactly the batch returned by the preceding
        ``ask()``; ``scores`` one finite float per row, higher is better.
        """
        if self._pending is None:
            raise ProtocolViolationError("tell() called before ask()")
        codes = np.asarray(codes, dtype=float)
        if codes.shape != self._pending.shape:
            raise ShapeMismatchError(
                f"codes shape {codes.shape} != expected {self._pending.shape}"
            )
        scores = np.asarray(scores, dtype=float).ravel()
        if scores.shape[0] != codes.shape[0]:
            raise ShapeMismatchError(
                f"{scores.shape[0]} scores for {codes.shape[0]} codes"
            )
        if not np.array_equal(codes, self._pending):
            raise ProtocolViolationError(
                "codes differ from the batch proposed by the last ask()"
            )
        if not np.all(np.isfinite(scores)):
            bad = int(np.flatnonzero(~np.isfinite(scores))[0])
            raise NonFiniteScoreError(f"score {bad} is {scores[bad]!r}")
        self._update(self._pending, scores)
        self._pending = None
        self._t += 1

    # -- hooks for concrete optimizers --------------------------------------

    def _propose(self) -> np.ndarray:
        raise NotImplementedError

    def _update(self, codes: np.ndarray, scores: np.ndarray) -> None:
        raise NotImplementedError

    # -- snapshot support (see optimizers.snapshot) --------------------------

    def snapshot_config(self) -> dict:
        """JSON-safe constructor parameters sufficient to rebuild this instance."""
        raise NotImplementedError

    def snapshot_scalars(self) -> dict:
        """Float-valued state entries (may be empty)."""
        return {}

    def snapshot_arrays(self) -> dict:
        """Name -> float64 array state entries, in a fixed order."""
        return {}

    @classmethod
    def from_snapshot_parts(cls, config: dict, scalars: dict, arrays: dict, t: int):
        """Rebuild an instance from the parts written by the snapshot hooks."""
        raise NotImplementedError

    def _check_snapshot_allowed(self) -> None:
        if self._pending is not None:
            raise ProtocolViolationError(
                "state snapshot requires a completed generation "
                "(tell() the pending batch first)"
            )
