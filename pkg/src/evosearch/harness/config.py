"""Benchmark configuration: loading, validation, and fingerprinting.

The on-disk format is a small TOML file (flat tables); a JSON mirror with
the same structure is accepted for generated configs.  Every run record
carries the config's content hash so results can always be traced back to
the exact configuration that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import tomli

__all__ = [
    "ConfigError",
    "OptimizerSpec",
    "BenchmarkConfig",
    "load_config",
    "default_config",
    "DESK_TOML",
]

KNOWN_KINDS = ("cholesky", "diagonal", "sphere", "ga", "random")
KNOWN_PROFILES = ("shallow", "mid", "deep")

# Per-kind constructor parameters accepted in an optimizer table.
_KIND_PARAMS = {
    "cholesky": {"sigma0", "update_freq", "cutoff", "c1", "c_mu"},
    "diagonal": {"sigma0", "cutoff", "c1", "c_mu"},
    "sphere": {"radius", "schedule", "mu0", "mu_min", "tau", "learning_ratio", "cutoff"},
    "ga": {"elite", "temperature", "mutation_rate", "mutation_scale", "parents", "init_scale"},
    "random": {"sigma0"},
}


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class OptimizerSpec:
    """One optimizer entry of the benchmark grid."""

    ident: str
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Validated benchmark grid description.

    The evaluation budget must be an exact multiple of the population so
    every run executes ``budget / population`` full generations.
    """

    dimension: int
    budget: int
    population: int
    repetitions: int
    master_seed: int
    noise_levels: tuple
    profiles: tuple
    landscapes_per_profile: int
    optimizers: tuple
    out_dir: str = "runs"

    def __post_init__(self) -> None:
        if self.dimension < 16:
            raise ConfigError(f"dimension must be >= 16, got {self.dimension}")
        if self.population < 2:
            raise ConfigError(f"population must be >= 2, got {self.population}")
        if self.budget < self.population or self.budget % self.population != 0:
            raise ConfigError(
                f"budget {self.budget} is not a positive multiple of "
                f"population {self.population}"
            )
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if not self.noise_levels:
            raise ConfigError("at least one noise level is required")
        for alpha in self.noise_levels:
            if not alpha >= 0.0:
                raise ConfigError(f"noise level must be >= 0, got {alpha}")
        if not self.profiles:
            raise ConfigError("at least one landscape profile is required")
        for profile in self.profiles:
            if profile not in KNOWN_PROFILES:
                raise ConfigError(
                    f"unknown profile {profile!r}; expected one of {KNOWN_PROFILES}"
                )
        if self.landscapes_per_profile < 1:
            raise ConfigError("landscapes_per_profile must be >= 1")
        if not self.optimizers:
            raise ConfigError("at least one optimizer is required")
        seen = set()
        for spec in self.optimizers:
            if spec.ident in seen:
                raise ConfigError(f"duplicate optimizer id {spec.ident!r}")
            seen.add(spec.ident)
            if spec.kind not in KNOWN_KINDS:
                raise ConfigError(
                    f"optimizer {spec.ident!r}: unknown kind {spec.kind!r}; "
                    f"expected one of {KNOWN_KINDS}"
                )
            unknown = set(spec.params) - _KIND_PARAMS[spec.kind]
            if unknown:
                raise ConfigError(
                    f"optimizer {spec.ident!r}: unknown parameter(s) "
                    f"{sorted(unknown)} for kind {spec.kind!r}"
                )

    @property
    def generations(self) -> int:
        return self.budget // self.population

    def to_dict(self, include_out: bool = True) -> dict:
        grid = {
            "dimension": self.dimension,
            "budget": self.budget,
            "population": self.population,
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "noise_levels": list(self.noise_levels),
            "profiles": list(self.profiles),
            "landscapes_per_profile": self.landscapes_per_profile,
        }
        if include_out:
            grid["out_dir"] = self.out_dir
        return {
            "grid": grid,
            "optimizers": {
                spec.ident: {"kind": spec.kind, **spec.params}
                for spec in self.optimizers
            },
        }

    def fingerprint(self) -> str:
        """Content hash of the config, stable under key order and out_dir."""
        blob = json.dumps(
            self.to_dict(include_out=False), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _config_from_dict(data: dict) -> BenchmarkConfig:
    if not isinstance(data, dict) or "grid" not in data:
        raise ConfigError("config must contain a [grid] table")
    grid = data["grid"]
    opts_table = data.get("optimizers", {})
    if not isinstance(opts_table, dict) or not opts_table:
        raise ConfigError("config must contain at least one [optimizers.<id>] table")
    specs = []
    for ident, entry in opts_table.items():
        if not isinstance(entry, dict) or "kind" not in entry:
            raise ConfigError(f"optimizer {ident!r} needs a 'kind' key")
        params = {k: v for k, v in entry.items() if k != "kind"}
        specs.append(OptimizerSpec(ident=ident, kind=entry["kind"], params=params))
    try:
        return BenchmarkConfig(
            dimension=int(grid["dimension"]),
            budget=int(grid["budget"]),
            population=int(grid["population"]),
            repetitions=int(grid["repetitions"]),
            master_seed=int(grid["master_seed"]),
            noise_levels=tuple(float(a) for a in grid["noise_levels"]),
            profiles=tuple(grid["profiles"]),
            landscapes_per_profile=int(grid.get("landscapes_per_profile", 1)),
            optimizers=tuple(specs),
            out_dir=str(grid.get("out_dir", "runs")),
        )
    except KeyError as exc:
        raise ConfigError(f"missing required grid key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid grid value: {exc}") from exc


def load_config(path) -> BenchmarkConfig:
    """Load a TOML config (or its JSON mirror, by .json extension)."""
    text_path = str(path)
    try:
        if text_path.endswith(".json"):
            with open(path, "rb") as fh:
                data = json.load(fh)
        else:
            with open(path, "rb") as fh:
                data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {text_path}: {exc}") from exc
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {text_path}: {exc}") from exc
    return _config_from_dict(data)


# Desk-scale default: a full grid that finishes in minutes on a laptop.
DESK_TOML = """\
[grid]
dimension = 256
budget = 3000
population = 40
repetitions = 5
master_seed = 20240601
noise_levels = [0.0, 0.2, 0.5]
profiles = ["shallow", "mid", "deep"]
landscapes_per_profile = 1
out_dir = "runs"

[optimizers.cholesky]
kind = "cholesky"

[optimizers.diagonal]
kind = "diagonal"

[optimizers.sphere-exp]
kind = "sphere"
schedule = "exponential"

[optimizers.ga]
kind = "ga"

[optimizers.random]
kind = "random"
"""


def default_config() -> BenchmarkConfig:
    """The desk-scale profile: d=256, B=40, T=75, 3 profiles x 3 alpha x 5 reps."""
    return _config_from_dict(tomli.loads(DESK_TOML))
