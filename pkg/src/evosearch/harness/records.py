"""Run records and their on-disk layout.

Each run owns one directory under the runs root:

    <runs>/<run_id>/arrays.npz    per-generation arrays
    <runs>/<run_id>/record.json   scalars and metadata, written last
    <runs>/<run_id>/failure.json  present when the run failed

record.json is the completeness marker: a directory without it is treated
as unfinished and re-executed on resume.  Writes are confined to the run's
own directory, so concurrent runs never contend.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "IoError",
    "RunRecord",
    "run_dir_name",
    "save_record",
    "load_record",
    "load_records",
    "record_failure",
    "load_failures",
]


class IoError(OSError):
    """A record file could not be written or read back."""


@dataclass
class RunRecord:
    """Everything recorded about one optimizer run.

    Attributes
    ----------
    fingerprint : str
        Content hash of the producing config.
    run_id : str
        Filesystem-safe unique id of the run within its grid.
    optimizer : str
        Optimizer id from the config.
    kind : str
        Optimizer kind ("cholesky", "ga", ...).
    landscape : str
        Landscape (unit) id.
    profile : str
        Landscape depth profile.
    alpha : float
        Noise level.
    seed : int
        Per-run seed.
    means : ndarray, shape (T, d)
        Post-update mean code of each generation.
    sigmas : ndarray, shape (T,)
        Step size per generation; NaN where the optimizer defines none.
    raw, noisy, clean : ndarray, shape (T, B)
        Per-sample scores of each generation.
    runtime : float
        Wall-clock seconds.
    final_clean_best : float
        Highest clean score achieved over the whole run.
    final_kappa, final_delta : float
        End-of-run covariance condition number and identity distance, NaN
        for optimizers without an explicit covariance.
    partial : bool
        True when the run was aborted (external peer failure) and the
        arrays cover only the completed generations.
    """

    fingerprint: str
    run_id: str
    optimizer: str
    kind: str
    landscape: str
    profile: str
    alpha: float
    seed: int
    means: np.ndarray
    sigmas: np.ndarray
    raw: np.ndarray
    noisy: np.ndarray
    clean: np.ndarray
    runtime: float
    final_clean_best: float
    final_kappa: float = math.nan
    final_delta: float = math.nan
    partial: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.means = np.asarray(self.means, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        for name in ("raw", "noisy", "clean"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        t = self.means.shape[0]
        if self.sigmas.shape != (t,) or self.raw.shape[0] != t:
            raise ValueError(
                f"inconsistent generation counts: means {self.means.shape}, "
                f"sigmas {self.sigmas.shape}, raw {self.raw.shape}"
            )
        if self.raw.shape != self.noisy.shape or self.raw.shape != self.clean.shape:
            raise ValueError("raw/noisy/clean shapes disagree")
        if not self.runtime >= 0.0:
            raise ValueError(f"runtime must be >= 0, got {self.runtime}")

    @property
    def generations(self) -> int:
        return self.means.shape[0]

    @property
    def population(self) -> int:
        return self.raw.shape[1]

    @property
    def evaluations(self) -> int:
        return self.raw.size


def run_dir_name(optimizer: str, landscape: str, alpha: float, rep: int) -> str:
    """Filesystem-safe id for one grid cell repetition."""
    return f"{optimizer}__{landscape}__a{alpha:g}__r{rep}"


_ARRAY_FIELDS = ("means", "sigmas", "raw", "noisy", "clean")


def save_record(record: RunRecord, runs_dir) -> Path:
    """Persist one record; record.json lands last as the completeness marker."""
    run_dir = Path(runs_dir) / record.run_id
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        np.savez(
            run_dir / "arrays.npz",
            **{name: getattr(record, name) for name in _ARRAY_FIELDS},
        )
        scalars = {
            "fingerprint": record.fingerprint,
            "run_id": record.run_id,
            "optimizer": record.optimizer,
            "kind": record.kind,
            "landscape": record.landscape,
            "profile": record.profile,
            "alpha": record.alpha,
            "seed": record.seed,
            "runtime": record.runtime,
            "final_clean_best": record.final_clean_best,
            "final_kappa": record.final_kappa,
            "final_delta": record.final_delta,
            "partial": record.partial,
            "meta": record.meta,
        }
        with open(run_dir / "record.json", "w", encoding="utf-8") as fh:
            json.dump(scalars, fh, indent=1)
    except OSError as exc:
        raise IoError(f"cannot persist record to {run_dir}: {exc}") from exc
    return run_dir


def load_record(run_dir) -> RunRecord:
    """Read one persisted record back."""
    run_dir = Path(run_dir)
    try:
        with open(run_dir / "record.json", encoding="utf-8") as fh:
            scalars = json.load(fh)
        with np.load(run_dir / "arrays.npz") as arrays:
            parts = {name: arrays[name] for name in _ARRAY_FIELDS}
    except OSError as exc:
        raise IoError(f"cannot read record from {run_dir}: {exc}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise IoError(f"corrupt record in {run_dir}: {exc}") from exc
    return RunRecord(
        fingerprint=scalars["fingerprint"],
        run_id=scalars["run_id"],
        optimizer=scalars["optimizer"],
        kind=scalars["kind"],
        landscape=scalars["landscape"],
        profile=scalars["profile"],
        alpha=float(scalars["alpha"]),
        seed=int(scalars["seed"]),
        runtime=float(scalars["runtime"]),
        final_clean_best=float(scalars["final_clean_best"]),
        final_kappa=float(scalars.get("final_kappa", math.nan)),
        final_delta=float(scalars.get("final_delta", math.nan)),
        partial=bool(scalars.get("partial", False)),
        meta=scalars.get("meta", {}),
        **parts,
    )


def load_records(runs_dir) -> list[RunRecord]:
    """All complete records under a runs root, ordered by run id."""
    root = Path(runs_dir)
    if not root.is_dir():
        raise IoError(f"runs directory {root} does not exist")
    records = []
    for run_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if (run_dir / "record.json").is_file():
            records.append(load_record(run_dir))
    return records


def record_failure(runs_dir, run_id: str, message: str) -> Path:
    """Persist a cell failure so the grid can report it without aborting."""
    run_dir = Path(runs_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "failure.json", "w", encoding="utf-8") as fh:
        json.dump({"run_id": run_id, "error": message}, fh, indent=1)
    return run_dir


def load_failures(runs_dir) -> list[dict]:
    """All recorded cell failures under a runs root."""
    root = Path(runs_dir)
    out = []
    if root.is_dir():
        for run_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            marker = run_dir / "failure.json"
            if marker.is_file():
                with open(marker, encoding="utf-8") as fh:
                    out.append(json.load(fh))
    return out
