"""Classic real-valued genetic algorithm baseline.

Reconstruction of the usual activation-maximization GA recipe: elitism,
softmax fitness selection over within-population z-scored scores, uniform
gene-wise crossover, and per-gene additive Gaussian mutation.  Scores are
z-scored before the softmax so selection pressure does not depend on the
objective's absolute scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import AskTellOptimizer

__all__ = ["GAParams", "GA", "selection_probs"]


def selection_probs(scores, temperature: float) -> np.ndarray:
    """Parent-selection distribution: softmax of z-scored scores / temperature.

    Z-scoring makes selection pressure scale-free; temperature -> infinity
    approaches the uniform distribution, temperature -> 0 concentrates on
    the best score.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    std = scores.std()
    z = (scores - scores.mean()) / std if std > 0 else np.zeros(scores.size)
    logits = z / temperature
    logits -= logits.max()
    probs = np.exp(logits)
    return probs / probs.sum()


@dataclass(frozen=True)
class GAParams:
    """Hyperparameters of the genetic algorithm.

    Attributes
    ----------
    population : int
        Batch size B.
    elite : int
        Top codes copied unchanged into the next generation (must be < B).
    temperature : float
        Softmax temperature over z-scored scores; large values approach
        uniform parent selection.
    mutation_rate : float
        Per-gene probability of mutation, in [0, 1].
    mutation_scale : float
        Std of the additive Gaussian mutation.
    parents : int
        Parents drawn per child; genes are inherited uniformly among them.
    """

    population: int = 40
    elite: int = 10
    temperature: float = 0.7
    mutation_rate: float = 0.25
    mutation_scale: float = 0.75
    parents: int = 2

    def __post_init__(self) -> None:
        if self.population < 1:
            raise ValueError(f"population must be >= 1, got {self.population}")
        if not 0 <= self.elite < self.population:
            raise ValueError(
                f"need 0 <= elite < population, got {self.elite} of {self.population}"
            )
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if self.mutation_scale < 0:
            raise ValueError(f"mutation_scale must be >= 0, got {self.mutation_scale}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.parents < 1:
            raise ValueError(f"parents must be >= 1, got {self.parents}")


class GA(AskTellOptimizer):
    """Elitist genetic algorithm over real-valued codes.

    The initial population is drawn from N(0, init_scale^2 I).
    """

    kind = "ga"
    kind_code = 4

    def __init__(
        self,
        dim: int,
        params: GAParams | None = None,
        init_scale: float = 3.0,
        seed=None,
    ):
        params = GAParams() if params is None else params
        super().__init__(dim, params.population, seed)
        if init_scale < 0:
            raise ValueError(f"init_scale must be >= 0, got {init_scale}")
        self.params = params
        self.init_scale = float(init_scale)
        self._next_pop: np.ndarray | None = None

    # -- ask/tell -----------------------------------------------------------

    def _propose(self) -> np.ndarray:
        if self._next_pop is None:
            return self.init_scale * self._rng.standard_normal(
                (self._population, self._dim)
            )
        return self._next_pop

    def _update(self, codes: np.ndarray, scores: np.ndarray) -> None:
        p = self.params
        b, d = codes.shape
        order = np.argsort(-scores, kind="stable")
        elites = codes[order[: p.elite]].copy()
        probs = selection_probs(scores, p.temperature)

        n_children = b - p.elite
        parent_idx = self._rng.choice(b, size=(n_children, p.parents), p=probs)
        gene_source = self._rng.integers(0, p.parents, size=(n_children, d))
        chosen = np.take_along_axis(parent_idx, gene_source, axis=1)  # (n, d)
        children = codes[chosen, np.arange(d)[None, :]]

        mutate = self._rng.random((n_children, d)) < p.mutation_rate
        noise = p.mutation_scale * self._rng.standard_normal((n_children, d))
        children = children + np.where(mutate, noise, 0.0)

        self._next_pop = np.vstack([elites, children])

    # -- snapshots ----------------------------------------------------------

    def snapshot_config(self) -> dict:
        p = self.params
        return {
            "dim": self._dim,
            "population": p.population,
            "elite": p.elite,
            "temperature": p.temperature,
            "mutation_rate": p.mutation_rate,
            "mutation_scale": p.mutation_scale,
            "parents": p.parents,
            "init_scale": self.init_scale,
        }

    def snapshot_arrays(self) -> dict:
        pop = (
            np.zeros((0, self._dim)) if self._next_pop is None else self._next_pop
        )
        return {"next_pop": pop}

    @classmethod
    def from_snapshot_parts(cls, config: dict, scalars: dict, arrays: dict, t: int):
        opt = cls(
            dim=config["dim"],
            params=GAParams(
                population=config["population"],
                elite=config["elite"],
                temperature=config["temperature"],
                mutation_rate=config["mutation_rate"],
                mutation_scale=config["mutation_scale"],
                parents=config["parents"],
            ),
            init_scale=config["init_scale"],
        )
        opt._t = int(t)
        pop = arrays["next_pop"]
        opt._next_pop = None if pop.shape[0] == 0 else pop.copy()
        return opt
