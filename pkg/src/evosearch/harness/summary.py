"""Statistical summaries of benchmark grids and CSV export.

Scores are normalized per landscape unit (each unit's clean maximum over
all optimizers and repetitions becomes 1) before aggregation, mirroring
activation normalization by the per-unit empirical maximum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..objectives import normalize_scores
from .records import IoError, RunRecord

__all__ = [
    "InsufficientDataError",
    "CellStats",
    "SummaryTable",
    "welch_t",
    "summarize",
    "render_markdown",
    "export_csv",
    "export_summary_csv",
    "export_trajectories_csv",
    "TRAJECTORY_HEADER",
]

CMA_FAMILY_KINDS = ("cholesky", "diagonal", "sphere")


class InsufficientDataError(ValueError):
    """A cell holds fewer than two records; its t-tests are omitted."""


def welch_t(a, b) -> tuple[float, float, float]:
    """Welch two-sample t-test.

    Returns (t, degrees of freedom, two-sided p).  Requires two samples
    per side.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InsufficientDataError(
            f"Welch test needs >= 2 samples per side, got {a.size} and {b.size}"
        )
    res = stats.ttest_ind(a, b, equal_var=False)
    return float(res.statistic), float(res.df), float(res.pvalue)


@dataclass
class CellStats:
    """Aggregates of one (optimizer, profile, alpha) cell."""

    mean: float
    sem: float          # NaN when the cell has a single record
    runtime: float
    n: int
    scores: np.ndarray  # normalized clean scores, one per record


@dataclass
class SummaryTable:
    """Normalized-score summary of a benchmark grid.

    cells        : (optimizer, profile, alpha) -> CellStats
    cell_welch   : ((opt_a, opt_b), profile, alpha) -> (t, df, p)
    pooled_welch : ((opt_a, opt_b), alpha) -> (t, df, p), pooled over profiles
    ratios       : alpha -> CMA-family mean / GA mean
    excluded     : landscape units dropped by normalization
    notes        : data-sufficiency remarks
    """

    cells: dict = field(default_factory=dict)
    cell_welch: dict = field(default_factory=dict)
    pooled_welch: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def optimizers(self) -> list:
        return sorted({opt for opt, _, _ in self.cells})

    @property
    def profiles(self) -> list:
        return sorted({profile for _, profile, _ in self.cells})

    @property
    def alphas(self) -> list:
        return sorted({alpha for _, _, alpha in self.cells})


def summarize(records) -> SummaryTable:
    """Normalize, aggregate, and test a set of run records.

    Normalization is per landscape unit over every record that touched it;
    cell means and SEMs are taken over repetitions x landscapes.  Cells
    with a single record report their mean with an InsufficientData note
    and no t-tests.
    """
    records = [r for r in records if not r.partial]
    if not records:
        raise ValueError("summarize needs at least one complete record")

    per_unit: dict = {}
    for rec in records:
        per_unit.setdefault(rec.landscape, []).append(rec.final_clean_best)
    normalized_units, excluded = normalize_scores(per_unit)
    unit_max = {unit: max(scores) for unit, scores in per_unit.items() if unit in normalized_units}

    table = SummaryTable(excluded=excluded)
    kinds: dict = {}
    cell_scores: dict = {}
    cell_runtimes: dict = {}
    for rec in records:
        if rec.landscape not in unit_max:
            continue
        key = (rec.optimizer, rec.profile, rec.alpha)
        cell_scores.setdefault(key, []).append(rec.final_clean_best / unit_max[rec.landscape])
        cell_runtimes.setdefault(key, []).append(rec.runtime)
        kinds[rec.optimizer] = rec.kind

    for key, scores in cell_scores.items():
        arr = np.array(scores)
        n = arr.size
        if n < 2:
            sem = math.nan
            table.notes.append(
                f"cell {key}: single record, t-tests omitted (InsufficientData)"
            )
        else:
            sem = float(arr.std(ddof=1) / math.sqrt(n))
        table.cells[key] = CellStats(
            mean=float(arr.mean()),
            sem=sem,
            runtime=float(np.mean(cell_runtimes[key])),
            n=n,
            scores=arr,
        )

    optimizers = table.optimizers
    pairs = [
        (a, b) for i, a in enumerate(optimizers) for b in optimizers[i + 1 :]
    ]
    for pair in pairs:
        a, b = pair
        for profile in table.profiles:
            for alpha in table.alphas:
                ka, kb = (a, profile, alpha), (b, profile, alpha)
                if ka in table.cells and kb in table.cells:
                    try:
                        table.cell_welch[(pair, profile, alpha)] = welch_t(
                            table.cells[ka].scores, table.cells[kb].scores
                        )
                    except InsufficientDataError:
                        pass
        for alpha in table.alphas:
            sa = np.concatenate(
                [
                    table.cells[(a, p, alpha)].scores
                    for p in table.profiles
                    if (a, p, alpha) in table.cells
                ]
                or [np.empty(0)]
            )
            sb = np.concatenate(
                [
                    table.cells[(b, p, alpha)].scores
                    for p in table.profiles
                    if (b, p, alpha) in table.cells
                ]
                or [np.empty(0)]
            )
            if sa.size >= 2 and sb.size >= 2:
                table.pooled_welch[(pair, alpha)] = welch_t(sa, sb)

    family = [opt for opt, kind in kinds.items() if kind in CMA_FAMILY_KINDS]
    ga_like = [opt for opt, kind in kinds.items() if kind == "ga"]
    for alpha in table.alphas:
        fam_scores = np.concatenate(
            [
                table.cells[(o, p, alpha)].scores
                for o in family
                for p in table.profiles
                if (o, p, alpha) in table.cells
            ]
            or [np.empty(0)]
        )
        ga_scores = np.concatenate(
            [
                table.cells[(o, p, alpha)].scores
                for o in ga_like
                for p in table.profiles
                if (o, p, alpha) in table.cells
            ]
            or [np.empty(0)]
        )
        if fam_scores.size and ga_scores.size and ga_scores.mean() > 0:
            table.ratios[alpha] = float(fam_scores.mean() / ga_scores.mean())
    return table


def render_markdown(table: SummaryTable) -> str:
    """Markdown view of a summary: cell table, ratio row, pooled tests."""
    lines = ["# Benchmark summary", ""]
    alphas = table.alphas
    header = "| optimizer | profile | " + " | ".join(
        f"alpha={a:g}" for a in alphas
    ) + " |"
    lines += [header, "|" + "---|" * (2 + len(alphas))]
    for opt in table.optimizers:
        for profile in table.profiles:
            row = [opt, profile]
            for alpha in alphas:
                cell = table.cells.get((opt, profile, alpha))
                if cell is None:
                    row.append("-")
                elif math.isnan(cell.sem):
                    row.append(f"{cell.mean:.3f} (n={cell.n})")
                else:
                    row.append(f"{cell.mean:.3f} +/- {cell.sem:.3f}")
            lines.append("| " + " | ".join(row) + " |")
    if table.ratios:
        ratio_cells = " | ".join(
            f"{table.ratios[a]:.3f}" if a in table.ratios else "-" for a in alphas
        )
        lines.append(f"| CMA-family mean / GA mean | (pooled) | {ratio_cells} |")
    lines.append("")
    if table.pooled_welch:
        lines += ["## Pooled Welch tests (over profiles)", ""]
        lines += ["| pair | alpha | t | df | p |", "|---|---|---|---|---|"]
        for ((a, b), alpha), (t, df, p) in sorted(table.pooled_welch.items()):
            lines.append(f"| {a} vs {b} | {alpha:g} | {t:.3f} | {df:.1f} | {p:.2e} |")
        lines.append("")
    if table.excluded:
        lines.append(f"Excluded all-zero units: {', '.join(map(str, table.excluded))}")
    for note in table.notes:
        lines.append(f"- {note}")
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


TRAJECTORY_HEADER = [
    "run_id", "optimizer", "kind", "landscape", "profile", "alpha", "seed",
    "generation", "sigma", "mean_sq_norm",
    "raw_mean", "raw_best", "noisy_mean", "noisy_best", "clean_mean", "clean_best",
]


def export_trajectories_csv(records, path) -> None:
    """One CSV row per (run, generation); floats carry 17 significant digits.

    Columns follow TRAJECTORY_HEADER: identity fields, then the step size,
    the squared norm of the mean code, and per-generation score aggregates.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_HEADER)
            for rec in records:
                for gen in range(rec.generations):
                    writer.writerow(
                        [
                            rec.run_id, rec.optimizer, rec.kind, rec.landscape,
                            rec.profile, _fmt(rec.alpha), rec.seed, gen,
                            _fmt(rec.sigmas[gen]),
                            _fmt(float(np.sum(rec.means[gen] ** 2))),
                            _fmt(rec.raw[gen].mean()), _fmt(rec.raw[gen].max()),
                            _fmt(rec.noisy[gen].mean()), _fmt(rec.noisy[gen].max()),
                            _fmt(rec.clean[gen].mean()), _fmt(rec.clean[gen].max()),
                        ]
                    )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


SUMMARY_HEADER = ["optimizer", "profile", "alpha", "mean", "sem", "runtime", "n"]


def export_summary_csv(table: SummaryTable, path) -> None:
    """One CSV row per summary cell, following SUMMARY_HEADER."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_HEADER)
            for (opt, profile, alpha), cell in sorted(table.cells.items()):
                writer.writerow(
                    [opt, profile, _fmt(alpha), _fmt(cell.mean), _fmt(cell.sem),
                     _fmt(cell.runtime), cell.n]
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def export_csv(subject, path) -> None:
    """Export run records (trajectory rows) or a SummaryTable to CSV."""
    if isinstance(subject, SummaryTable):
        export_summary_csv(subject, path)
        return
    records = list(subject)
    if records and not isinstance(records[0], RunRecord):
        raise TypeError(f"cannot export {type(records[0]).__name__} rows to CSV")
    export_trajectories_csv(records, path)
