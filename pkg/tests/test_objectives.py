"""Tests for objectives, the noise channel, and the external-peer protocol."""

import subprocess
import sys
import textwrap

import numpy as np
import pytest
from scipy import stats

from evosearch.geometry import default_radius
from evosearch.objectives import (
    AllZeroUnitError,
    DimensionMismatchError,
    Evaluator,
    NoiseSpec,
    PeerCrashError,
    PeerTimeoutError,
    ProtocolError,
    QuadricLandscape,
    ScoreBatch,
    SubprocessTransport,
    external_objective,
    make_landscape_suite,
    noise_only_objective,
    noisy_wrap,
    normalize_scores,
    normalize_unit,
    per_eval_rng,
    quadric_eval,
)


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


class FixedEps:
    """Stub noise stream returning a constant epsilon."""

    def __init__(self, eps):
        self.eps = eps

    def standard_normal(self, shape=()):
        return np.full(shape, self.eps)


# ---------------------------------------------------------------------------
# noise channel


def test_noisy_wrap_zero_alpha_passthrough():
    assert noisy_wrap(5.3, NoiseSpec(0.0), philox(0)) == 5.3
    assert noisy_wrap(-2.0, NoiseSpec(0.0), philox(0)) == 0.0


def test_noisy_wrap_hand_examples():
    # (1 - 1.5) * 10 = -5, floored to 0; (1 + 0.2) * 10 = 12
    assert noisy_wrap(10.0, NoiseSpec(0.5), FixedEps(-3.0)) == 0.0
    assert noisy_wrap(10.0, NoiseSpec(0.2), FixedEps(1.0)) == 12.0


def test_noisy_wrap_never_negative():
    rng = philox(1)
    out = noisy_wrap(np.full(10_000, 3.0), NoiseSpec(0.5), rng)
    assert out.shape == (10_000,)
    assert np.all(out >= 0.0)


def test_noisy_wrap_clipped_mean_matches_analytic():
    # For r > 0 the noisy score is max(0, Y), Y ~ N(r, (alpha r)^2); its
    # mean is mu*Phi(mu/s) + s*phi(mu/s) with mu = r, s = alpha*r.
    r, alpha = 10.0, 0.5
    mu, s = r, alpha * r
    analytic = mu * stats.norm.cdf(mu / s) + s * stats.norm.pdf(mu / s)
    draws = noisy_wrap(np.full(1_000_000, r), NoiseSpec(alpha), philox(7))
    assert draws.mean() == pytest.approx(analytic, rel=0.005)
    assert analytic > r * (1.0 - 0.01)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(float("nan"))


def test_per_eval_rng_streams_are_keyed():
    a = per_eval_rng(3, 5, 2).standard_normal(4)
    b = per_eval_rng(3, 5, 2).standard_normal(4)
    c = per_eval_rng(3, 5, 3).standard_normal(4)
    d = per_eval_rng(3, 6, 2).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


# ---------------------------------------------------------------------------
# quadrics


def hand_landscape():
    return QuadricLandscape(
        optimum=np.array([1.0, -2.0, 0.5]),
        spectrum=np.array([1.0, 0.1, 0.0]),
        f_max=10.0,
        active=2,
    )


def test_quadric_peak_at_optimum():
    land = hand_landscape()
    assert quadric_eval(land.optimum, land) == 10.0
    assert land(land.optimum) == 10.0


def test_quadric_hand_example():
    land = hand_landscape()
    z = land.optimum + np.array([1.0, 2.0, 0.0])
    # 10 - 1*1 - 0.1*4 = 8.6
    assert quadric_eval(z, land) == pytest.approx(8.6, abs=1e-12)


def test_quadric_zero_curvature_subspace_is_invariant():
    land = hand_landscape()
    z = land.optimum + np.array([0.3, -0.7, 0.0])
    base = quadric_eval(z, land)
    for shift in (-100.0, 3.0, 550.0):
        moved = z + np.array([0.0, 0.0, shift])
        assert quadric_eval(moved, land) == pytest.approx(base, abs=1e-9)


def test_quadric_floor_at_zero():
    land = hand_landscape()
    far = land.optimum + np.array([100.0, 0.0, 0.0])
    assert quadric_eval(far, land) == 0.0


def test_quadric_batch_matches_single():
    land = hand_landscape()
    batch = philox(3).standard_normal((12, 3)) * 2.0
    out = quadric_eval(batch, land)
    assert out.shape == (12,)
    for i in range(12):
        assert out[i] == quadric_eval(batch[i], land)


def test_quadric_rotated_basis():
    # With basis rows (e2, e1) the roles of the first two coordinates swap.
    land = QuadricLandscape(
        optimum=np.zeros(3),
        spectrum=np.array([1.0, 0.1, 0.0]),
        f_max=10.0,
        active=2,
        basis=np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
    )
    assert quadric_eval(np.array([0.0, 1.0, 0.0]), land) == pytest.approx(9.0)
    assert quadric_eval(np.array([1.0, 0.0, 0.0]), land) == pytest.approx(9.9)


def test_quadric_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        quadric_eval(np.zeros(4), hand_landscape())


def test_quadric_validation():
    with pytest.raises(ValueError):
        QuadricLandscape(np.zeros(3), np.array([0.1, 1.0, 0.0]), 1.0, 2)  # ascending
    with pytest.raises(ValueError):
        QuadricLandscape(np.zeros(3), np.array([1.0, -0.1, 0.0]), 1.0, 2)
    with pytest.raises(ValueError):
        QuadricLandscape(np.zeros(3), np.array([1.0, 0.1, 0.0]), 1.0, 3)
    with pytest.raises(ValueError):
        QuadricLandscape(
            np.zeros(3),
            np.array([1.0, 0.1, 0.0]),
            1.0,
            2,
            basis=np.ones((2, 3)),
        )


# ---------------------------------------------------------------------------
# landscape suites


def test_suite_shallow_256_has_five_active_dims():
    suite = make_landscape_suite(256, "shallow", philox(0))
    assert len(suite) == 3
    assert all(land.active == 5 for land in suite)
    assert all(land.dim == 256 for land in suite)


def test_suite_profile_active_fractions():
    for profile, expected in (("shallow", 1), ("mid", 6), ("deep", 32)):
        suite = make_landscape_suite(64, profile, philox(1), count=1)
        assert suite[0].active == expected


def test_suite_condition_numbers_span_1e4_to_1e9():
    suite = make_landscape_suite(64, "mid", philox(2))
    conds = []
    for land in suite:
        nonzero = land.spectrum[: land.active]
        conds.append(nonzero.max() / nonzero.min())
    assert conds[0] == pytest.approx(1e4, rel=1e-9)
    assert conds[1] == pytest.approx(10**6.5, rel=1e-9)
    assert conds[2] == pytest.approx(1e9, rel=1e-9)
    assert all(c >= 1e4 * (1 - 1e-12) for c in conds)


def test_suite_deterministic_per_seed():
    a = make_landscape_suite(64, "deep", philox(5))
    b = make_landscape_suite(64, "deep", philox(5))
    c = make_landscape_suite(64, "deep", philox(6))
    for la, lb in zip(a, b):
        assert np.array_equal(la.optimum, lb.optimum)
        assert np.array_equal(la.spectrum, lb.spectrum)
        assert np.array_equal(la.basis, lb.basis)
    assert not np.array_equal(a[0].optimum, c[0].optimum)


def test_suite_origin_score_and_optimum_geometry():
    suite = make_landscape_suite(256, "mid", philox(9))
    origin = np.zeros(256)
    for land in suite:
        assert quadric_eval(origin, land) == pytest.approx(35.0, abs=1e-9)
        assert quadric_eval(land.optimum, land) == 100.0
        assert np.linalg.norm(land.optimum) == pytest.approx(
            default_radius(256), rel=1e-12
        )


def test_suite_input_validation():
    with pytest.raises(ValueError):
        make_landscape_suite(8, "mid", philox(0))
    with pytest.raises(ValueError):
        make_landscape_suite(64, "bottomless", philox(0))
    with pytest.raises(ValueError):
        make_landscape_suite(64, "mid", philox(0), count=0)


# ---------------------------------------------------------------------------
# pure-noise control


def test_noise_only_distribution_and_independence():
    obj = noise_only_objective(philox(11))
    codes = philox(12).standard_normal((10_000, 8)) * 5.0
    scores = np.concatenate([obj(codes[i : i + 100]) for i in range(0, 10_000, 100)])
    assert scores.mean() == pytest.approx(0.0, abs=0.03)
    assert scores.std() == pytest.approx(1.0, abs=0.03)
    corr = np.corrcoef(scores, np.linalg.norm(codes, axis=1))[0, 1]
    assert abs(corr) < 0.05


def test_noise_only_deterministic_and_clean_zero():
    a = noise_only_objective(philox(3))(np.zeros((5, 2)))
    b = noise_only_objective(philox(3))(np.zeros((5, 2)))
    assert np.array_equal(a, b)
    raw, clean = noise_only_objective(philox(4)).scores(np.zeros((6, 2)), gen=0)
    assert raw.shape == (6,)
    assert np.array_equal(clean, np.zeros(6))


# ---------------------------------------------------------------------------
# normalization


def test_normalize_unit_examples():
    assert np.array_equal(
        normalize_unit([10.0, 20.0, 40.0]), np.array([0.25, 0.5, 1.0])
    )
    assert normalize_unit([50.0])[0] == 1.0
    with pytest.raises(AllZeroUnitError):
        normalize_unit([0.0, 0.0])
    with pytest.raises(AllZeroUnitError):
        normalize_unit([-3.0, -1.0])


def test_normalize_scores_per_unit_denominators():
    runs = {"a": [10.0, 20.0, 40.0], "b": [1.0, 4.0]}
    normalized, excluded = normalize_scores(runs)
    assert excluded == []
    assert np.array_equal(normalized["a"], np.array([0.25, 0.5, 1.0]))
    assert np.array_equal(normalized["b"], np.array([0.25, 1.0]))
    assert max(normalized["a"]) == max(normalized["b"]) == 1.0


def test_normalize_scores_excludes_and_reports_all_zero_units():
    runs = {"good": [5.0, 2.0], "dead": [0.0, 0.0]}
    with pytest.warns(UserWarning, match="dead"):
        normalized, excluded = normalize_scores(runs)
    assert excluded == ["dead"]
    assert "dead" not in normalized
    assert np.array_equal(normalized["good"], np.array([1.0, 0.4]))


# ---------------------------------------------------------------------------
# evaluator pipeline


def test_evaluator_noise_free_invariant():
    land = make_landscape_suite(64, "mid", philox(1), count=1)[0]
    ev = Evaluator(land, NoiseSpec(0.0), run_seed=42)
    codes = philox(2).standard_normal((10, 64)) * 3.0
    batch = ev(codes, gen=0)
    assert isinstance(batch, ScoreBatch)
    assert np.array_equal(batch.noisy, np.maximum(0.0, batch.raw))
    assert np.array_equal(batch.clean, batch.raw)
    rec = batch.record(3)
    assert rec.raw == batch.raw[3] and rec.noisy == batch.noisy[3]


def test_evaluator_noisy_channel_uses_keyed_streams():
    land = make_landscape_suite(64, "mid", philox(1), count=1)[0]
    spec = NoiseSpec(0.5)
    codes = philox(2).standard_normal((8, 64)) * 3.0
    batch = Evaluator(land, spec, run_seed=42)(codes, gen=7)
    again = Evaluator(land, spec, run_seed=42)(codes, gen=7)
    other = Evaluator(land, spec, run_seed=43)(codes, gen=7)
    assert np.array_equal(batch.noisy, again.noisy)
    assert not np.array_equal(batch.noisy, other.noisy)
    expected = np.array(
        [
            noisy_wrap(float(batch.raw[i]), spec, per_eval_rng(42, 7, i))
            for i in range(8)
        ]
    )
    assert np.array_equal(batch.noisy, expected)
    assert np.array_equal(batch.clean, batch.raw)


# ---------------------------------------------------------------------------
# external peers


def spawn_reference_peer(dim, timeout=10.0, score="axis0"):
    argv = [sys.executable, "-m", "evosearch.objectives", "--score", score]
    return SubprocessTransport(argv, dim=dim, timeout=timeout)


def spawn_script_peer(tmp_path, body, dim=3, timeout=2.0):
    script = tmp_path / "peer.py"
    script.write_text(textwrap.dedent(body))
    return SubprocessTransport([sys.executable, str(script)], dim=dim, timeout=timeout)


def test_reference_peer_axis0_roundtrip():
    with spawn_reference_peer(4) as transport:
        codes = philox(5).standard_normal((6, 4))
        scores = transport.request(0, codes)
        # 17-significant-digit serialization round-trips f64 exactly
        assert np.array_equal(scores, codes[:, 0])
        obj = external_objective(transport)
        raw, clean = obj.scores(codes, gen=1)
        assert np.array_equal(raw, codes[:, 0])
        assert np.array_equal(clean, raw)


def test_reference_peer_preserves_axis0_ordering():
    with spawn_reference_peer(3) as transport:
        codes = philox(6).standard_normal((20, 3))
        scores = transport.request(0, codes)
        assert np.array_equal(np.argsort(scores), np.argsort(codes[:, 0]))


def test_reference_peer_many_generations():
    with spawn_reference_peer(5) as transport:
        for gen in range(30):
            scores = transport.request(gen, np.full((4, 5), float(gen)))
            assert np.array_equal(scores, np.full(4, float(gen)))
        assert transport.requests_sent == 30


def test_transport_rejects_bad_code_shapes():
    with spawn_reference_peer(4) as transport:
        with pytest.raises(DimensionMismatchError):
            transport.request(0, np.zeros((3, 5)))


def test_peer_wrong_length_reply_is_protocol_error(tmp_path):
    body = """
    import sys, json
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "hello":
            print('{"type":"ready"}', flush=True)
        elif msg["type"] == "eval":
            print(json.dumps({"type": "scores", "gen": msg["gen"],
                              "scores": [1.0]}), flush=True)
        else:
            break
    """
    with spawn_script_peer(tmp_path, body) as transport:
        with pytest.raises(ProtocolError):
            transport.request(0, np.zeros((4, 3)))


@pytest.mark.parametrize(
    "reply",
    [
        "not json at all",
        '{"type":"scores","gen":0,"scores":"oops"}',
        '{"type":"scores","gen":99,"scores":[1.0,2.0,3.0,4.0]}',
        '{"type":"banana","gen":0,"scores":[1.0,2.0,3.0,4.0]}',
        '{"type":"scores","gen":0,"scores":[1.0,2.0,"x",4.0]}',
        '{"type":"scores","gen":0,"scores":[1.0,2.0,NaN,4.0]}',
        '[1.0,2.0,3.0,4.0]',
    ],
    ids=["garbage", "nonlist", "gen-echo", "wrong-type", "nonnum", "nan", "nonobject"],
)
def test_peer_malformed_replies_never_become_scores(tmp_path, reply):
    body = f"""
    import sys, json
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "hello":
            print('{{"type":"ready"}}', flush=True)
        elif msg["type"] == "eval":
            print({reply!r}, flush=True)
        else:
            break
    """
    with spawn_script_peer(tmp_path, body) as transport:
        with pytest.raises(ProtocolError):
            transport.request(0, np.zeros((4, 3)))


def test_peer_timeout(tmp_path):
    body = """
    import sys, json, time
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "hello":
            print('{"type":"ready"}', flush=True)
        elif msg["type"] == "eval":
            time.sleep(30)
        else:
            break
    """
    with spawn_script_peer(tmp_path, body, timeout=0.5) as transport:
        with pytest.raises(PeerTimeoutError):
            transport.request(0, np.zeros((2, 3)))


def test_peer_crash(tmp_path):
    body = """
    import sys, json
    line = sys.stdin.readline()
    print('{"type":"ready"}', flush=True)
    sys.exit(3)
    """
    with spawn_script_peer(tmp_path, body) as transport:
        with pytest.raises(PeerCrashError):
            transport.request(0, np.zeros((2, 3)))


def test_peer_refusing_handshake(tmp_path):
    body = """
    import sys
    sys.stdin.readline()
    print('{"type":"busy"}', flush=True)
    sys.stdin.readline()
    """
    with pytest.raises(ProtocolError):
        spawn_script_peer(tmp_path, body)
