"""Objective functions and scoring wrappers.

Provides the multiplicative-noise score channel, synthetic ill-conditioned
quadric landscapes with invariant subspaces, a pure-noise control objective,
per-unit score normalization, and a line-delimited JSON subprocess protocol
for plugging in external evaluators.

Every candidate evaluation carries three numbers: the raw objective value,
the noisy value actually shown to the optimizer, and the clean (noise-free)
value used for reporting.
"""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
import threading
import warnings
from dataclasses import dataclass
from queue import Empty, Queue

import numpy as np

from .geometry import default_radius

__all__ = [
    "DimensionMismatchError",
    "AllZeroUnitError",
    "PeerTimeoutError",
    "ProtocolError",
    "PeerCrashError",
    "NoiseSpec",
    "ScoreRecord",
    "ScoreBatch",
    "QuadricLandscape",
    "noisy_wrap",
    "quadric_eval",
    "make_landscape_suite",
    "noise_only_objective",
    "NoiseOnlyObjective",
    "normalize_unit",
    "normalize_scores",
    "per_eval_rng",
    "Evaluator",
    "SubprocessTransport",
    "ExternalObjective",
    "external_objective",
]

ALPHA_PRESETS = (0.0, 0.2, 0.5)


class DimensionMismatchError(ValueError):
    """Candidate dimension does not match the landscape dimension."""


class AllZeroUnitError(ValueError):
    """A unit never produced a positive clean score; it cannot be normalized."""


class PeerTimeoutError(RuntimeError):
    """The external peer did not answer within the allowed time."""


class ProtocolError(RuntimeError):
    """The external peer sent a malformed or inconsistent message."""


class PeerCrashError(RuntimeError):
    """The external peer exited or closed its stream mid-conversation."""


# ---------------------------------------------------------------------------
# noise channel


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative-noise configuration.

    The noisy score is max(0, (1 + alpha*eps) * r) with eps ~ N(0, 1) drawn
    fresh for every evaluation.  ``alpha`` in {0, 0.2, 0.5} are the
    benchmark presets.
    """

    alpha: float
    seed: int | None = None

    def __post_init__(self) -> None:
        if not (np.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError(f"alpha must be a finite non-negative real, got {self.alpha}")


@dataclass(frozen=True)
class ScoreRecord:
    """Raw, noisy, and clean value of one evaluation."""

    raw: float
    noisy: float
    clean: float


@dataclass(frozen=True)
class ScoreBatch:
    """Raw, noisy, and clean score arrays for one generation."""

    raw: np.ndarray
    noisy: np.ndarray
    clean: np.ndarray

    def record(self, i: int) -> ScoreRecord:
        return ScoreRecord(
            raw=float(self.raw[i]), noisy=float(self.noisy[i]), clean=float(self.clean[i])
        )


def noisy_wrap(r, spec: NoiseSpec, rng: np.random.Generator):
    """Apply multiplicative Gaussian noise and the non-negativity floor.

    Parameters
    ----------
    r : float or ndarray
        Raw score(s).
    spec : NoiseSpec
        Noise level; eps is redrawn per entry from ``rng``.
    rng : numpy Generator
        Noise stream.

    Returns
    -------
    float or ndarray
        max(0, (1 + alpha*eps) * r), elementwise.
    """
    arr = np.asarray(r, dtype=float)
    if spec.alpha == 0.0:
        out = np.maximum(0.0, arr)
    else:
        eps = rng.standard_normal(arr.shape)
        out = np.maximum(0.0, (1.0 + spec.alpha * eps) * arr)
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


def per_eval_rng(run_seed: int, gen: int, index: int) -> np.random.Generator:
    """Independent noise stream for evaluation ``index`` of generation ``gen``.

    Streams are derived from (run seed, generation, index) so that runs with
    equal seeds see identical noise regardless of evaluation order, and
    different coordinates never share a stream.
    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((run_seed, gen, index)))
    )


# ---------------------------------------------------------------------------
# quadric landscapes


@dataclass
class QuadricLandscape:
    """Concave quadric with an invariant (zero-curvature) subspace.

    f(z) = max(0, f_max - sum_k spectrum_k * (u_k . (z - optimum))^2)

    where the u_k are the rows of ``basis`` (the standard basis when None).
    Only the ``active`` leading spectrum entries are nonzero; displacement
    confined to the remaining dimensions never changes the score.

    Attributes
    ----------
    optimum : ndarray, shape (d,)
        Peak location z*.
    spectrum : ndarray, shape (d,)
        Non-negative curvatures, sorted descending.
    f_max : float
        Peak value f(z*).
    active : int
        Number of nonzero curvatures.
    basis : ndarray or None, shape (active, d)
        Orthonormal rows spanning the curved subspace; None means the
        leading standard basis vectors.
    name : str
        Label used as the unit id in benchmark records.
    """

    optimum: np.ndarray
    spectrum: np.ndarray
    f_max: float
    active: int
    basis: np.ndarray | None = None
    name: str = ""

    def __post_init__(self) -> None:
        self.optimum = np.asarray(self.optimum, dtype=float)
        self.spectrum = np.asarray(self.spectrum, dtype=float)
        d = self.optimum.shape[0]
        if self.optimum.ndim != 1 or self.spectrum.shape != (d,):
            raise ValueError(
                f"optimum and spectrum must both have shape (d,), got "
                f"{self.optimum.shape} and {self.spectrum.shape}"
            )
        if np.any(self.spectrum < 0.0):
            raise ValueError("curvatures must be non-negative")
        if np.any(np.diff(self.spectrum) > 0.0):
            raise ValueError("spectrum must be sorted descending")
        nonzero = int(np.count_nonzero(self.spectrum))
        if self.active != nonzero:
            raise ValueError(
                f"active={self.active} but spectrum has {nonzero} nonzero entries"
            )
        if self.basis is not None:
            self.basis = np.asarray(self.basis, dtype=float)
            if self.basis.shape != (self.active, d):
                raise ValueError(
                    f"basis must have shape ({self.active}, {d}), got {self.basis.shape}"
                )
            gram = self.basis @ self.basis.T
            if not np.allclose(gram, np.eye(self.active), atol=1e-8):
                raise ValueError("basis rows are not orthonormal within 1e-8")

    @property
    def dim(self) -> int:
        return self.optimum.shape[0]

    def __call__(self, z):
        return quadric_eval(z, self)

    def scores(self, codes: np.ndarray, gen: int) -> tuple[np.ndarray, np.ndarray]:
        """Raw and clean channel for one batch (identical: f is noise-free)."""
        f = np.atleast_1d(np.asarray(quadric_eval(codes, self), dtype=float))
        return f, f


def quadric_eval(z, landscape: QuadricLandscape):
    """Evaluate a quadric landscape at one code or a batch of codes.

    Parameters
    ----------
    z : ndarray, shape (d,) or (n, d)
    landscape : QuadricLandscape

    Returns
    -------
    float or ndarray
        f(z) = max(0, f_max - sum_k lambda_k (u_k . (z - z*))^2).
    """
    arr = np.asarray(z, dtype=float)
    single = arr.ndim == 1
    batch = np.atleast_2d(arr)
    if batch.shape[1] != landscape.dim:
        raise DimensionMismatchError(
            f"codes have dimension {batch.shape[1]}, landscape expects {landscape.dim}"
        )
    diff = batch - landscape.optimum
    k = landscape.active
    if landscape.basis is None:
        y = diff[:, :k]
    else:
        y = diff @ landscape.basis.T
    penalty = y**2 @ landscape.spectrum[:k]
    out = np.maximum(0.0, landscape.f_max - penalty)
    return float(out[0]) if single else out


_PROFILE_FRACTIONS = {"shallow": 0.02, "mid": 0.1, "deep": 0.5}

# Fraction of the peak value visible at the origin; fixes the spectrum scale
# so every landscape starts equally far (in score) from its optimum.
_ORIGIN_FRACTION = 0.35


def make_landscape_suite(
    d: int,
    depth_profile: str,
    rng: np.random.Generator,
    count: int = 3,
    f_max: float = 100.0,
) -> list[QuadricLandscape]:
    """Deterministic suite of ill-conditioned quadrics for one depth profile.

    The profile fixes the active-dimension count (2%, 10%, or 50% of d for
    shallow/mid/deep); condition numbers are log-linearly interpolated
    between 1e4 and 1e9 across the suite.  Each landscape gets a random
    orthonormal curved subspace and an optimum at the reference search
    radius, scaled so the origin scores ``_ORIGIN_FRACTION * f_max``.

    Parameters
    ----------
    d : int
        Code dimension, at least 16.
    depth_profile : str
        One of "shallow", "mid", "deep".
    rng : numpy Generator
        Consumed for the random frames and optima; equal state gives an
        identical suite.
    count : int
        Landscapes per suite.
    f_max : float
        Peak value shared by all landscapes.
    """
    if d < 16:
        raise ValueError(f"need d >= 16, got {d}")
    if depth_profile not in _PROFILE_FRACTIONS:
        raise ValueError(
            f"depth_profile must be one of {sorted(_PROFILE_FRACTIONS)}, "
            f"got {depth_profile!r}"
        )
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    active = max(1, round(_PROFILE_FRACTIONS[depth_profile] * d))
    conditions = np.logspace(4.0, 9.0, count) if count > 1 else np.array([1e4])
    radius = default_radius(d)

    suite = []
    for i, cond in enumerate(conditions):
        q, r = np.linalg.qr(rng.standard_normal((d, active)))
        q *= np.sign(np.diag(r))
        basis = q.T
        direction = rng.standard_normal(d)
        optimum = direction * (radius / np.linalg.norm(direction))
        spectrum = np.zeros(d)
        spectrum[:active] = np.logspace(0.0, -math.log10(cond), active)
        # Scale so f(origin) = _ORIGIN_FRACTION * f_max.
        origin_penalty = float((basis @ optimum) ** 2 @ spectrum[:active])
        if origin_penalty <= 0.0:
            raise ValueError("degenerate optimum: origin penalty vanished")
        spectrum *= (1.0 - _ORIGIN_FRACTION) * f_max / origin_penalty
        suite.append(
            QuadricLandscape(
                optimum=optimum,
                spectrum=spectrum,
                f_max=f_max,
                active=active,
                basis=basis,
                name=f"{depth_profile}-{i}",
            )
        )
    return suite


# ---------------------------------------------------------------------------
# pure-noise control


class NoiseOnlyObjective:
    """Scores are iid N(0, 1) regardless of the codes.

    The clean channel is identically zero: a pure-noise unit carries no
    signal to evaluate without noise.
    """

    dim = None

    def __init__(self, rng: np.random.Generator) -> None:
        self._rng = rng

    def __call__(self, codes) -> np.ndarray:
        n = np.atleast_2d(np.asarray(codes, dtype=float)).shape[0]
        return self._rng.standard_normal(n)

    def scores(self, codes, gen: int) -> tuple[np.ndarray, np.ndarray]:
        raw = self(codes)
        return raw, np.zeros_like(raw)


def noise_only_objective(rng: np.random.Generator) -> NoiseOnlyObjective:
    """Control objective whose scores are pure noise."""
    return NoiseOnlyObjective(rng)


# ---------------------------------------------------------------------------
# score normalization


def normalize_unit(scores) -> np.ndarray:
    """Divide one unit's scores by their maximum.

    Raises AllZeroUnitError when the unit never scored above zero.
    """
    arr = np.asarray(scores, dtype=float)
    top = arr.max(initial=-np.inf)
    if not top > 0.0:
        raise AllZeroUnitError(f"unit max is {top}, cannot normalize")
    return arr / top


def normalize_scores(runs) -> tuple[dict, list]:
    """Per-unit normalization of clean scores.

    Every unit's scores are divided by that unit's own clean maximum, so the
    best normalized score per unit is exactly 1 and units never share a
    denominator.  Units that never scored above zero are excluded from the
    result and reported (warning plus the returned list).

    Parameters
    ----------
    runs : mapping
        unit id -> sequence of clean scores collected across all optimizers
        and repetitions for that unit.

    Returns
    -------
    (dict, list)
        Normalized scores per surviving unit, and the excluded unit ids.
    """
    normalized: dict = {}
    excluded: list = []
    for unit, scores in runs.items():
        try:
            normalized[unit] = normalize_unit(scores)
        except AllZeroUnitError:
            excluded.append(unit)
    if excluded:
        warnings.warn(
            f"excluded {len(excluded)} all-zero unit(s): {excluded}", stacklevel=2
        )
    return normalized, excluded


# ---------------------------------------------------------------------------
# full scoring pipeline


class Evaluator:
    """Scores one run's batches through the noise channel.

    Wraps a raw objective (anything with ``scores(codes, gen) -> (raw,
    clean)``) and produces the (raw, noisy, clean) triple the optimizer and
    records consume.  Noise draws come from per-evaluation streams keyed by
    (run seed, generation, index).
    """

    def __init__(self, objective, noise: NoiseSpec, run_seed: int) -> None:
        self.objective = objective
        self.noise = noise
        self.run_seed = int(run_seed)

    def __call__(self, codes: np.ndarray, gen: int) -> ScoreBatch:
        raw, clean = self.objective.scores(codes, gen)
        if self.noise.alpha == 0.0:
            noisy = np.maximum(0.0, raw)
        else:
            noisy = np.array(
                [
                    noisy_wrap(float(raw[i]), self.noise, per_eval_rng(self.run_seed, gen, i))
                    for i in range(raw.shape[0])
                ]
            )
        return ScoreBatch(raw=raw, noisy=noisy, clean=clean)


# ---------------------------------------------------------------------------
# external objectives over line-delimited JSON


def _fmt_float(x: float) -> str:
    # 17 significant digits: enough to round-trip any f64 exactly.
    return format(float(x), ".17g")


def _eval_line(gen: int, codes: np.ndarray) -> str:
    rows = ",".join(
        "[" + ",".join(_fmt_float(v) for v in row) + "]" for row in codes
    )
    return f'{{"type":"eval","gen":{int(gen)},"codes":[{rows}]}}'


class _StreamReader(threading.Thread):
    """Background reader so blocking peers cannot hang the run."""

    def __init__(self, stream) -> None:
        super().__init__(daemon=True)
        self._stream = stream
        self.lines: Queue = Queue()
        self.start()

    def run(self) -> None:
        try:
            for line in self._stream:
                self.lines.put(line)
        except ValueError:
            pass  # stream closed underneath us
        self.lines.put(None)  # EOF marker


class SubprocessTransport:
    """One external evaluator behind a subprocess's standard streams.

    Speaks the line-delimited JSON protocol: a hello/ready handshake, one
    eval request per generation answered by a scores message echoing the
    generation index, and a bye on close.  A connection is exclusive to one
    run.
    """

    def __init__(self, argv, dim: int, timeout: float = 10.0) -> None:
        self.dim = int(dim)
        self.timeout = float(timeout)
        self.requests_sent = 0
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._reader = _StreamReader(self._proc.stdout)
        self._send(f'{{"type":"hello","dim":{self.dim}}}')
        reply = self._receive()
        if reply.get("type") != "ready":
            raise ProtocolError(f"expected ready handshake, got {reply!r}")

    # -- plumbing

    def _send(self, line: str) -> None:
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PeerCrashError(f"peer closed stdin pipe: {exc}") from exc

    def _receive(self) -> dict:
        try:
            line = self._reader.lines.get(timeout=self.timeout)
        except Empty:
            raise PeerTimeoutError(
                f"no reply within {self.timeout:.1f}s"
            ) from None
        if line is None:
            code = self._proc.poll()
            raise PeerCrashError(f"peer stream closed (exit status {code})")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable reply {line!r}: {exc}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError(f"reply is not an object: {line!r}")
        return msg

    # -- protocol

    def request(self, gen: int, codes: np.ndarray) -> np.ndarray:
        """Send one batch; return its scores in order.

        Every malformed reply raises; a score is never fabricated.
        """
        codes = np.asarray(codes, dtype=float)
        if codes.ndim != 2 or codes.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"codes must be (n, {self.dim}), got {codes.shape}"
            )
        self._send(_eval_line(gen, codes))
        self.requests_sent += 1
        msg = self._receive()
        if msg.get("type") != "scores":
            raise ProtocolError(f"expected scores message, got {msg.get('type')!r}")
        if msg.get("gen") != int(gen):
            raise ProtocolError(
                f"generation echo mismatch: sent {gen}, got {msg.get('gen')!r}"
            )
        scores = msg.get("scores")
        if not isinstance(scores, list) or len(scores) != codes.shape[0]:
            raise ProtocolError(
                f"expected {codes.shape[0]} scores, got "
                f"{len(scores) if isinstance(scores, list) else type(scores).__name__}"
            )
        try:
            arr = np.array(scores, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"non-numeric score in reply: {exc}") from exc
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ProtocolError("scores must be finite floats")
        return arr

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._send('{"type":"bye"}')
            except PeerCrashError:
                pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "SubprocessTransport":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ExternalObjective:
    """Raw objective served by a SubprocessTransport peer.

    The peer's scores are taken as both the raw and the clean channel; any
    noise is applied on top by the Evaluator.
    """

    def __init__(self, transport: SubprocessTransport) -> None:
        self.transport = transport
        self.dim = transport.dim

    def __call__(self, codes, gen: int = 0) -> np.ndarray:
        return self.transport.request(gen, np.atleast_2d(np.asarray(codes, float)))

    def scores(self, codes, gen: int) -> tuple[np.ndarray, np.ndarray]:
        raw = self(codes, gen)
        return raw, raw.copy()


def external_objective(transport: SubprocessTransport) -> ExternalObjective:
    """Adapt a transport into the raw-objective interface."""
    return ExternalObjective(transport)


# ---------------------------------------------------------------------------
# reference peer (python3 -m evosearch.objectives)


def _peer_score(mode: str, codes: np.ndarray) -> np.ndarray:
    if mode == "axis0":
        return codes[:, 0]
    if mode == "norm":
        return -np.linalg.norm(codes, axis=1)
    raise ValueError(f"unknown score mode {mode!r}")


def _peer_main(argv=None) -> int:
    """Minimal in-process peer for protocol tests and demos."""
    parser = argparse.ArgumentParser(prog="evosearch-peer", add_help=True)
    parser.add_argument("--score", choices=("axis0", "norm"), default="axis0")
    args = parser.parse_args(argv)

    out = sys.stdout
    for line in sys.stdin:
        msg = json.loads(line)
        kind = msg.get("type")
        if kind == "hello":
            out.write('{"type":"ready"}\n')
        elif kind == "eval":
            codes = np.array(msg["codes"], dtype=float)
            scores = _peer_score(args.score, codes)
            body = ",".join(_fmt_float(s) for s in scores)
            out.write(f'{{"type":"scores","gen":{int(msg["gen"])},"scores":[{body}]}}\n')
        elif kind == "bye":
            break
        out.flush()
    return 0


if __name__ == "__main__":
    sys.exit(_peer_main())
