"""Grid execution: per-run seeding, the run loop, and parallel dispatch.

Every cell of the (optimizer x landscape x noise x repetition) grid is one
independent run with its own seed derived from the master seed and the cell
coordinates, so results do not depend on execution order or thread count.
"""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import DecaySchedule
from ..objectives import (
    Evaluator,
    NoiseSpec,
    PeerCrashError,
    PeerTimeoutError,
    ProtocolError,
    make_landscape_suite,
)
from ..optimizers import (
    GA,
    CholeskyCMA,
    DiagonalCMA,
    GAParams,
    RandomSearch,
    SphereCMA,
    isotropy_check,
)
from .config import BenchmarkConfig, ConfigError, OptimizerSpec
from .records import (
    RunRecord,
    load_record,
    record_failure,
    run_dir_name,
    save_record,
)

__all__ = [
    "GridResult",
    "derive_run_seed",
    "build_optimizer",
    "build_landscapes",
    "execute_run",
    "run_grid",
]

_PEER_ERRORS = (PeerTimeoutError, ProtocolError, PeerCrashError)


def derive_run_seed(
    master_seed: int, optimizer: str, landscape: str, alpha: float, rep: int
) -> int:
    """Stable 63-bit seed from the master seed and cell coordinates."""
    key = f"{master_seed}|{optimizer}|{landscape}|{alpha:.17g}|{rep}"
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def build_optimizer(spec: OptimizerSpec, dim: int, population: int, seed: int):
    """Instantiate one optimizer from its config entry."""
    p = spec.params
    if spec.kind == "cholesky":
        return CholeskyCMA(
            dim,
            population,
            sigma0=p.get("sigma0", 3.0),
            update_freq=p.get("update_freq", 10),
            cutoff=p.get("cutoff"),
            c1=p.get("c1"),
            c_mu=p.get("c_mu"),
            seed=seed,
        )
    if spec.kind == "diagonal":
        return DiagonalCMA(
            dim,
            population,
            sigma0=p.get("sigma0", 3.0),
            cutoff=p.get("cutoff"),
            c1=p.get("c1"),
            c_mu=p.get("c_mu"),
            seed=seed,
        )
    if spec.kind == "sphere":
        name = p.get("schedule", "exponential")
        if name == "exponential":
            schedule = DecaySchedule.exponential(
                p.get("mu0", 0.4), p.get("mu_min", 0.05), p.get("tau", 25.0)
            )
        elif name == "inverse":
            schedule = DecaySchedule.inverse(p.get("mu0", 0.4), p.get("tau", 10.0))
        else:
            raise ConfigError(f"unknown sphere schedule {name!r}")
        return SphereCMA(
            dim,
            population,
            radius=p.get("radius"),
            schedule=schedule,
            learning_ratio=p.get("learning_ratio", 1.5),
            cutoff=p.get("cutoff"),
            seed=seed,
        )
    if spec.kind == "ga":
        params = GAParams(
            population=population,
            elite=p.get("elite", 10),
            temperature=p.get("temperature", 0.7),
            mutation_rate=p.get("mutation_rate", 0.25),
            mutation_scale=p.get("mutation_scale", 0.75),
            parents=p.get("parents", 2),
        )
        return GA(dim, params, init_scale=p.get("init_scale", 3.0), seed=seed)
    if spec.kind == "random":
        return RandomSearch(dim, population, sigma0=p.get("sigma0", 3.0), seed=seed)
    raise ConfigError(f"unknown optimizer kind {spec.kind!r}")


def build_landscapes(config: BenchmarkConfig):
    """The grid's landscape units, deterministic per master seed."""
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence((config.master_seed, 1)))
    )
    out = []
    for profile in config.profiles:
        suite = make_landscape_suite(
            config.dimension, profile, rng, count=config.landscapes_per_profile
        )
        out.extend((profile, land) for land in suite)
    return out


def execute_run(
    objective,
    opt,
    *,
    noise: NoiseSpec,
    generations: int,
    run_seed: int,
    fingerprint: str,
    run_id: str,
    optimizer_id: str,
    landscape_id: str,
    profile: str,
    alpha: float,
    runs_dir=None,
) -> RunRecord:
    """Drive one ask/tell run to completion and build its record.

    External-peer failures abort the run but persist the partial record
    first (when ``runs_dir`` is given), then re-raise.
    """
    d, b = opt.dim, opt.population
    means = np.zeros((generations, d))
    sigmas = np.full(generations, math.nan)
    raw = np.zeros((generations, b))
    noisy = np.zeros((generations, b))
    clean = np.zeros((generations, b))
    evaluator = Evaluator(objective, noise, run_seed)

    start = time.perf_counter()
    done = 0
    try:
        for gen in range(generations):
            codes = opt.ask()
            batch = evaluator(codes, gen)
            opt.tell(codes, batch.noisy)
            mean = opt.mean
            means[gen] = codes.mean(axis=0) if mean is None else mean
            sigma = opt.sigma
            sigmas[gen] = math.nan if sigma is None else sigma
            raw[gen] = batch.raw
            noisy[gen] = batch.noisy
            clean[gen] = batch.clean
            done = gen + 1
    except _PEER_ERRORS:
        record = _make_record(
            fingerprint, run_id, optimizer_id, opt.kind, landscape_id, profile,
            alpha, run_seed, means[:done], sigmas[:done], raw[:done],
            noisy[:done], clean[:done], time.perf_counter() - start, opt,
            partial=True,
        )
        if runs_dir is not None:
            save_record(record, runs_dir)
        raise

    record = _make_record(
        fingerprint, run_id, optimizer_id, opt.kind, landscape_id, profile,
        alpha, run_seed, means, sigmas, raw, noisy, clean,
        time.perf_counter() - start, opt, partial=False,
    )
    if runs_dir is not None:
        save_record(record, runs_dir)
    return record


def _make_record(
    fingerprint, run_id, optimizer_id, kind, landscape_id, profile, alpha,
    run_seed, means, sigmas, raw, noisy, clean, runtime, opt, partial,
) -> RunRecord:
    kappa = delta = math.nan
    if kind in ("cholesky", "diagonal"):
        kappa, delta = isotropy_check(opt)
    return RunRecord(
        fingerprint=fingerprint,
        run_id=run_id,
        optimizer=optimizer_id,
        kind=kind,
        landscape=landscape_id,
        profile=profile,
        alpha=alpha,
        seed=run_seed,
        means=means,
        sigmas=sigmas,
        raw=raw,
        noisy=noisy,
        clean=clean,
        runtime=runtime,
        final_clean_best=float(clean.max()) if clean.size else 0.0,
        final_kappa=kappa,
        final_delta=delta,
        partial=partial,
    )


@dataclass
class GridResult:
    """Outcome of one grid execution."""

    records: list
    failures: list  # (run_id, message)
    skipped: int    # cells reused from disk on resume


def run_grid(
    config: BenchmarkConfig,
    threads: int = 1,
    resume: bool = False,
    runs_dir=None,
) -> GridResult:
    """Execute every grid cell; cell failures are recorded, never fatal.

    Per-run seeds derive from (master seed, cell coordinates), so the
    result multiset is invariant under thread count and execution order.
    With ``resume``, cells whose records are already on disk are loaded
    instead of re-executed.
    """
    root = Path(runs_dir if runs_dir is not None else config.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    fingerprint = config.fingerprint()
    landscapes = build_landscapes(config)

    cells = []
    for spec in config.optimizers:
        for profile, land in landscapes:
            for alpha in config.noise_levels:
                for rep in range(config.repetitions):
                    cells.append((spec, profile, land, alpha, rep))

    records: list = []
    failures: list = []
    skipped = 0

    def one_cell(cell):
        spec, profile, land, alpha, rep = cell
        run_id = run_dir_name(spec.ident, land.name, alpha, rep)
        run_dir = root / run_id
        if resume and (run_dir / "record.json").is_file():
            existing = load_record(run_dir)
            if existing.fingerprint != fingerprint:
                raise ConfigError(
                    f"{run_id}: existing record was produced by config "
                    f"{existing.fingerprint}, current is {fingerprint}"
                )
            if not existing.partial:
                return "skipped", existing
        seed = derive_run_seed(config.master_seed, spec.ident, land.name, alpha, rep)
        opt = build_optimizer(spec, config.dimension, config.population, seed)
        record = execute_run(
            land,
            opt,
            noise=NoiseSpec(alpha),
            generations=config.generations,
            run_seed=seed,
            fingerprint=fingerprint,
            run_id=run_id,
            optimizer_id=spec.ident,
            landscape_id=land.name,
            profile=profile,
            alpha=alpha,
            runs_dir=root,
        )
        failure_marker = run_dir / "failure.json"
        if failure_marker.is_file():
            failure_marker.unlink()
        return "ran", record

    def guarded(cell):
        spec, profile, land, alpha, rep = cell
        run_id = run_dir_name(spec.ident, land.name, alpha, rep)
        try:
            return one_cell(cell)
        except ConfigError:
            raise
        except Exception as exc:  # noqa: BLE001 - cell isolation contract
            record_failure(root, run_id, f"{type(exc).__name__}: {exc}")
            return "failed", (run_id, f"{type(exc).__name__}: {exc}")

    if threads <= 1:
        outcomes = [guarded(cell) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(guarded, cells))

    for status, payload in outcomes:
        if status == "failed":
            failures.append(payload)
        else:
            records.append(payload)
            if status == "skipped":
                skipped += 1
    return GridResult(records=records, failures=failures, skipped=skipped)
