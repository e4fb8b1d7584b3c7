"""Diagnostic reports over persisted runs.

Drives the trajectory-geometry diagnostics across run records and renders
one Markdown report plus plot-ready CSV files.  Individual analyses fail
in isolation: a broken analysis becomes a FAILED section, never an abort.
"""

from __future__ import annotations

import csv
import math
import warnings
from pathlib import Path

import numpy as np

from ..diagnostics import (
    cosine_fit,
    eigenframe_projection,
    load_frame,
    norm_growth_fit,
    pca_mean_trajectory,
    shuffle_directions,
    theoretical_expvar,
)

__all__ = ["ANALYSES", "analyze"]

ANALYSES = ("pca", "cosfit", "normgrowth", "covmetrics", "align")

_TOP_K = 8


def analyze(records, analyses, out_dir=None, frame_path=None, shuffles: int = 500):
    """Run selected diagnostics over records.

    Parameters
    ----------
    records : sequence of RunRecord
    analyses : sequence of str
        Subset of ANALYSES.
    out_dir : path or None
        Where plot-ready CSVs land; no files are written when None.
    frame_path : path or None
        Eigenframe file, required by the "align" analysis.
    shuffles : int
        Shuffle-control resamples for the alignment null.

    Returns
    -------
    (str, dict)
        The Markdown report and {csv name: path} for emitted files.
    """
    analyses = list(analyses)
    unknown = [a for a in analyses if a not in ANALYSES]
    if unknown:
        raise ValueError(f"unknown analyses {unknown}; expected subset of {ANALYSES}")
    if "align" in analyses and frame_path is None:
        raise ValueError(
            "the align analysis projects evolution directions onto a stored "
            "eigenframe; provide one with --frame <file> (see synthesize_frame "
            "and save_frame)"
        )

    records = list(records)
    lines = ["# Diagnostic report", ""]
    files: dict = {}
    if not records:
        warnings.warn("no records to analyze; emitting empty report", stacklevel=2)
        lines.append("No records found.")
        return "\n".join(lines) + "\n", files

    lines.append(f"{len(records)} run(s); analyses: {', '.join(analyses)}.")
    lines.append("")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    handlers = {
        "pca": _pca_section,
        "cosfit": _cosfit_section,
        "normgrowth": _normgrowth_section,
        "covmetrics": _covmetrics_section,
        "align": _align_section,
    }
    for name in analyses:
        try:
            if name == "align":
                section, emitted = _align_section(records, out, frame_path, shuffles)
            else:
                section, emitted = handlers[name](records, out)
            lines += section
            files.update(emitted)
        except Exception as exc:  # noqa: BLE001 - per-analysis isolation
            lines += [f"## {name}: FAILED", "", f"{type(exc).__name__}: {exc}", ""]
    return "\n".join(lines) + "\n", files


def _write_csv(out, name, header, rows):
    if out is None:
        return {}
    path = out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return {name: path}


def _eligible(records, min_gens):
    return [r for r in records if r.generations >= min_gens]


def _pca_section(records, out):
    usable = _eligible(records, 3)
    if not usable:
        return ["## PCA spectrum", "", "No record has enough generations.", ""], {}
    by_T: dict = {}
    for rec in usable:
        by_T.setdefault(rec.generations, []).append(rec)
    lines = ["## PCA spectrum vs random-walk theory", ""]
    rows = []
    for t_len in sorted(by_T):
        group = by_T[t_len]
        k_max = min(10, t_len - 1)
        ratios = np.stack(
            [pca_mean_trajectory(rec.means).ratios[:k_max] for rec in group]
        )
        mean_ratios = ratios.mean(axis=0)
        theory = [theoretical_expvar(k, t_len) for k in range(1, k_max + 1)]
        lines += [
            f"T={t_len}, {len(group)} run(s):",
            "",
            "| k | mean rho-hat(k) | theory rho(k) |",
            "|---|---|---|",
        ]
        for k in range(k_max):
            lines.append(f"| {k + 1} | {mean_ratios[k]:.4f} | {theory[k]:.4f} |")
            rows.append([t_len, k + 1, f"{mean_ratios[k]:.17g}", f"{theory[k]:.17g}"])
        lines.append("")
    files = _write_csv(out, "pca_spectrum.csv", ["T", "k", "rho_hat", "rho_theory"], rows)
    return lines, files


def _cosfit_section(records, out):
    usable = _eligible(records, 8)
    if not usable:
        return ["## Cosine fits", "", "No record has enough generations.", ""], {}
    per_k: dict = {}
    for rec in usable:
        pca = pca_mean_trajectory(rec.means)
        top = min(_TOP_K, pca.projections.shape[1])
        for k in range(1, top + 1):
            fit = cosine_fit(pca.projections[:, k - 1], k)
            per_k.setdefault(k, []).append((fit.omega, fit.r2))
    lines = [
        "## Cosine fits of PC projections",
        "",
        "| k | mean omega | k/2 | mean R^2 | share R^2 > 0.8 |",
        "|---|---|---|---|---|",
    ]
    rows = []
    for k in sorted(per_k):
        omegas = np.array([w for w, _ in per_k[k]])
        r2s = np.array([r for _, r in per_k[k]])
        share = float((r2s > 0.8).mean())
        lines.append(
            f"| {k} | {omegas.mean():.3f} | {k / 2:.1f} | {r2s.mean():.3f} | {share:.2f} |"
        )
        rows.append(
            [k, f"{omegas.mean():.17g}", f"{k / 2:.17g}", f"{r2s.mean():.17g}", f"{share:.17g}"]
        )
    lines.append("")
    files = _write_csv(
        out, "cosfit.csv", ["k", "omega_mean", "omega_theory", "r2_mean", "share_r2_gt_0.8"], rows
    )
    return lines, files


def _normgrowth_section(records, out):
    usable = _eligible(records, 10)
    if not usable:
        return ["## Norm growth", "", "No record has enough generations.", ""], {}
    lines = [
        "## Squared-norm growth of mean codes",
        "",
        "| run | slope | intercept | r^2 |",
        "|---|---|---|---|",
    ]
    rows = []
    for rec in usable:
        slope, intercept, r2 = norm_growth_fit(rec.means)
        lines.append(f"| {rec.run_id} | {slope:.3f} | {intercept:.3f} | {r2:.4f} |")
        rows.append([rec.run_id, f"{slope:.17g}", f"{intercept:.17g}", f"{r2:.17g}"])
    lines.append("")
    files = _write_csv(out, "normgrowth.csv", ["run_id", "slope", "intercept", "r2"], rows)
    return lines, files


def _covmetrics_section(records, out):
    usable = [r for r in records if math.isfinite(r.final_kappa)]
    lines = ["## Covariance metrics at run end", ""]
    if not usable:
        lines += ["No record carries covariance metrics.", ""]
        return lines, {}
    by_opt: dict = {}
    for rec in usable:
        by_opt.setdefault(rec.optimizer, []).append((rec.final_kappa, rec.final_delta))
    lines += ["| optimizer | mean kappa - 1 | mean delta | runs |", "|---|---|---|---|"]
    rows = []
    for opt in sorted(by_opt):
        kappas = np.array([k for k, _ in by_opt[opt]])
        deltas = np.array([d for _, d in by_opt[opt]])
        lines.append(
            f"| {opt} | {kappas.mean() - 1:.3e} | {deltas.mean():.3e} | {len(by_opt[opt])} |"
        )
        rows.append(
            [opt, f"{kappas.mean() - 1:.17g}", f"{deltas.mean():.17g}", len(by_opt[opt])]
        )
    lines.append("")
    files = _write_csv(out, "covmetrics.csv", ["optimizer", "kappa_minus_1_mean", "delta_mean", "runs"], rows)
    return lines, files


def _align_section(records, out, frame_path, shuffles):
    frame = load_frame(frame_path)
    directions = [
        rec.means[-1] - rec.means[0]
        for rec in records
        if rec.means.shape[1] == frame.dim and rec.generations >= 2
    ]
    if not directions:
        return [
            "## Eigenframe alignment",
            "",
            f"No record matches the frame dimension {frame.dim}.",
            "",
        ], {}
    z = np.stack(directions)
    result = eigenframe_projection(z, frame)
    rng = np.random.Generator(np.random.Philox(0))
    null = np.array(
        [
            eigenframe_projection(shuffle_directions(z, rng), frame).pearson_r
            for _ in range(shuffles)
        ]
    )
    q99 = float(np.quantile(null, 0.99))
    lines = [
        "## Eigenframe alignment of evolution directions",
        "",
        f"{z.shape[0]} direction(s); cutoff {result.cutoff} of {frame.k} axes.",
        "",
        f"- corr(amplitude, log eigenvalue) = {result.pearson_r:.4f} (p = {result.pearson_p:.2e})",
        f"- KS head-vs-tail = {result.ks_stat:.4f} (p = {result.ks_p:.2e})",
        f"- shuffle control ({shuffles} resamples): 99th percentile r = {q99:.4f}, "
        f"max r = {null.max():.4f}",
        f"- observed exceeds the 99th-percentile control: {result.pearson_r > q99}",
        "",
    ]
    rows = [
        [k + 1, f"{result.amplitudes[k]:.17g}", f"{frame.eigenvalues[k]:.17g}"]
        for k in range(frame.k)
    ]
    files = _write_csv(out, "align_amplitudes.csv", ["k", "amplitude", "eigenvalue"], rows)
    return lines, files
