"""Tests for sphere primitives and decay schedules."""

import math

import numpy as np
import pytest

from evosearch.geometry import (
    DecaySchedule,
    DegenerateArcError,
    EmptyScoresError,
    NormMismatchError,
    NotTangentError,
    SphereParams,
    ZeroVectorError,
    decay_eval,
    default_radius,
    exp_map,
    rank_weight,
    slerp,
    tangent_project,
)

RNG = np.random.default_rng(20260821)


def random_sphere_point(rng, d, radius):
    x = rng.standard_normal(d)
    return radius * x / np.linalg.norm(x)


# ---------------------------------------------------------------------------
# frozen examples


def test_exp_map_quarter_plane_example():
    # Oracle: cos/sin of 30 degrees on the unit circle.
    out = exp_map(np.array([1.0, 0.0]), np.array([0.0, 1.0]), math.pi / 6)
    np.testing.assert_allclose(out, [0.8660254037844387, 0.5], atol=1e-12)


def test_exp_map_quarter_arc_lands_on_tangent_direction():
    out = exp_map(np.array([2.0, 0.0, 0.0]), np.array([0.0, 3.0, 0.0]), math.pi / 2)
    np.testing.assert_allclose(out, [0.0, 2.0, 0.0], atol=1e-12)


def test_slerp_midpoint_example():
    out = slerp(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.5)
    np.testing.assert_allclose(
        out, [0.7071067811865476, 0.7071067811865476], atol=1e-12
    )


def test_rank_weight_single_candidate():
    np.testing.assert_array_equal(rank_weight([7.0], 1), [1.0])


def test_tangent_project_radial_input_vanishes():
    m = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(tangent_project(3.7 * m, m), np.zeros(3), atol=1e-12)


def test_slerp_extrapolation_example():
    # Oracle: 1.5 of a quarter arc is 3*pi/4 around the circle.
    out = slerp(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 1.5)
    np.testing.assert_allclose(
        out, [-0.7071067811865475, 0.7071067811865476], atol=1e-12
    )


def test_rank_weight_example():
    # Oracle: raw weights ln(2.5)-ln(1)=0.9162907, ln(2.5)-ln(2)=0.2231436,
    # normalized over their sum 1.1394343.
    w = rank_weight([0.1, 0.9, 0.5, 0.7], 2)
    np.testing.assert_allclose(
        w, [0.0, 0.8041628575512456, 0.0, 0.1958371424487544], atol=1e-12
    )


def test_tangent_project_example():
    out = tangent_project(np.array([1.0, 1.0, 0.0]), np.array([2.0, 0.0, 0.0]))
    np.testing.assert_allclose(out, [0.0, 1.0, 0.0], atol=1e-15)


def test_default_radius_reference_points():
    assert default_radius(4096) == pytest.approx(300.0)
    assert default_radius(256) == pytest.approx(75.0)


# ---------------------------------------------------------------------------
# exp_map


def test_exp_map_preserves_norm_batch():
    d, n, radius = 64, 10_000, 75.0
    m = random_sphere_point(RNG, d, radius)
    v = tangent_project(RNG.standard_normal((n, d)), m)
    mus = 0.001 + 3.0 * RNG.random(n)
    # one mu per row via a loop over a few representative angles plus a
    # vectorized single-angle sweep
    out = exp_map(m, v, 0.7)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), radius, rtol=1e-10)
    for i in range(0, n, 997):
        q = exp_map(m, v[i], float(mus[i]))
        assert abs(np.linalg.norm(q) - radius) <= 1e-10 * radius


def test_exp_map_angle_traveled_matches_mu():
    d, radius = 32, 5.0
    m = random_sphere_point(RNG, d, radius)
    v = tangent_project(RNG.standard_normal(d), m)
    for mu in (0.01, 0.4, 1.0, math.pi / 2):
        q = exp_map(m, v, mu)
        angle = math.acos(np.clip(np.dot(m, q) / radius**2, -1, 1))
        assert angle == pytest.approx(mu, abs=1e-9)


def test_exp_map_zero_mu_is_identity():
    m = random_sphere_point(RNG, 16, 3.0)
    v = tangent_project(RNG.standard_normal(16), m)
    np.testing.assert_allclose(exp_map(m, v, 0.0), m, atol=1e-12)


def test_exp_map_rejects_zero_vectors():
    m = np.array([1.0, 0.0])
    with pytest.raises(ZeroVectorError):
        exp_map(np.zeros(2), np.array([0.0, 1.0]), 0.1)
    with pytest.raises(ZeroVectorError):
        exp_map(m, np.zeros(2), 0.1)


def test_exp_map_rejects_non_tangent():
    m = np.array([1.0, 0.0])
    with pytest.raises(NotTangentError):
        exp_map(m, np.array([0.5, 1.0]), 0.1)


def test_exp_map_accepts_tolerable_tangent_error():
    # Component along m at the 1e-8 relative threshold must pass.
    m = np.array([1.0, 0.0])
    v = np.array([0.9e-8, 1.0])
    out = exp_map(m, v, 0.3)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-8)


# ---------------------------------------------------------------------------
# slerp


def test_slerp_endpoints_and_norms():
    d, radius = 48, 12.5
    for _ in range(200):
        m = random_sphere_point(RNG, d, radius)
        p = random_sphere_point(RNG, d, radius)
        np.testing.assert_allclose(slerp(m, p, 0.0), m, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(slerp(m, p, 1.0), p, rtol=1e-9, atol=1e-9)
        for t in (0.25, 0.5, 1.5, 2.0):
            q = slerp(m, p, t)
            assert abs(np.linalg.norm(q) - radius) <= 1e-9 * radius
            # result stays in span{m, p}
            coeffs, residual, *_ = np.linalg.lstsq(
                np.stack([m, p], axis=1), q, rcond=None
            )
            assert float(residual[0]) if residual.size else 0.0 <= 1e-16


def test_slerp_matches_exp_map_route():
    # Traveling t*theta along the projected direction reproduces slerp.
    d, radius = 24, 7.0
    for _ in range(100):
        m = random_sphere_point(RNG, d, radius)
        p = random_sphere_point(RNG, d, radius)
        theta = math.acos(np.clip(np.dot(m, p) / radius**2, -1, 1))
        v = tangent_project(p, m)
        for t in (0.3, 1.0, 1.5, 2.0):
            np.testing.assert_allclose(
                slerp(m, p, t), exp_map(m, v, t * theta), rtol=1e-8, atol=1e-8
            )


def test_slerp_tiny_angle_returns_base():
    m = np.array([3.0, 0.0, 0.0])
    p = m * (1 + 1e-13)  # passes the relative norm gate, ~zero angle
    p = 3.0 * p / np.linalg.norm(p)
    out = slerp(m, p, 0.7)
    np.testing.assert_array_equal(out, m)


def test_slerp_rejects_norm_mismatch_and_antipodes():
    with pytest.raises(NormMismatchError):
        slerp(np.array([1.0, 0.0]), np.array([0.0, 2.0]), 0.5)
    with pytest.raises(DegenerateArcError):
        slerp(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), 0.5)
    with pytest.raises(ZeroVectorError):
        slerp(np.zeros(2), np.array([1.0, 0.0]), 0.5)


# ---------------------------------------------------------------------------
# rank_weight


def test_rank_weight_properties_bulk():
    # 10^4 random populations: weights sum to 1, exactly K positive entries,
    # ordering of positive weights follows score order.
    sizes = RNG.integers(1, 41, size=10_000)
    for b in sizes:
        s = RNG.standard_normal(int(b))
        w = rank_weight(s)
        k = max(1, int(b) // 2)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert (w > 0).sum() == k
        assert np.all(w >= 0)
        top = np.argsort(-s, kind="stable")[:k]
        ranked_w = w[top]
        assert np.all(np.diff(ranked_w) < 1e-15)


def test_rank_weight_invariant_under_monotone_transform():
    for _ in range(300):
        s = RNG.standard_normal(30)
        w1 = rank_weight(s, 15)
        w2 = rank_weight(np.tanh(s) * 10 + 3, 15)
        np.testing.assert_allclose(w1, w2, atol=1e-15)


def test_rank_weight_tie_break_by_index():
    w = rank_weight([0.5, 0.5, 0.5, 0.1], 2)
    assert w[0] > w[1] > 0
    assert w[2] == 0 and w[3] == 0


def test_rank_weight_cutoff_one_is_argmax():
    s = [0.2, 0.9, 0.4]
    w = rank_weight(s, 1)
    np.testing.assert_allclose(w, [0.0, 1.0, 0.0], atol=1e-15)


def test_rank_weight_errors():
    with pytest.raises(EmptyScoresError):
        rank_weight([])
    with pytest.raises(ValueError):
        rank_weight([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        rank_weight([1.0, 2.0], 0)


# ---------------------------------------------------------------------------
# tangent_project


def test_tangent_project_orthogonal_and_idempotent():
    d = 128
    m = random_sphere_point(RNG, d, 9.0)
    u = RNG.standard_normal((10_000, d))
    v = tangent_project(u, m)
    dots = v @ m
    assert np.max(np.abs(dots)) <= 1e-8 * 9.0 * np.linalg.norm(v, axis=1).max()
    np.testing.assert_allclose(tangent_project(v, m), v, rtol=1e-10, atol=1e-10)


def test_tangent_project_removes_only_radial_part():
    m = np.array([0.0, 2.0, 0.0])
    u = np.array([1.0, 5.0, -2.0])
    np.testing.assert_allclose(tangent_project(u, m), [1.0, 0.0, -2.0], atol=1e-12)


# ---------------------------------------------------------------------------
# decay schedules


def test_decay_exponential_shape():
    s = DecaySchedule.exponential(mu0=0.4, mu_min=0.05, tau=25.0)
    assert decay_eval(s, 0) == pytest.approx(0.4)
    # e-folding: at t = tau the excess over the floor shrinks by e
    assert decay_eval(s, 25) == pytest.approx(0.05 + 0.35 / math.e)
    assert decay_eval(s, 10_000) == pytest.approx(0.05, abs=1e-12)


def test_decay_inverse_shape():
    s = DecaySchedule.inverse(mu0=0.4, tau=10.0)
    assert decay_eval(s, 0) == pytest.approx(0.4)
    assert decay_eval(s, 10) == pytest.approx(0.2)
    assert decay_eval(s, 30) == pytest.approx(0.1)


def test_decay_monotone_nonincreasing():
    for s in (DecaySchedule.exponential(), DecaySchedule.inverse()):
        vals = [decay_eval(s, t) for t in range(0, 200)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert all(v > 0 for v in vals)


def test_decay_callable_matches_eval():
    s = DecaySchedule.exponential()
    assert s(17) == decay_eval(s, 17)


def test_decay_validation():
    with pytest.raises(ValueError):
        DecaySchedule("linear", 0.4, 0.05, 25.0)
    with pytest.raises(ValueError):
        DecaySchedule.exponential(mu0=0.0)
    with pytest.raises(ValueError):
        DecaySchedule.exponential(mu0=0.1, mu_min=0.2)
    with pytest.raises(ValueError):
        DecaySchedule.exponential(tau=0.0)
    with pytest.raises(ValueError):
        decay_eval(DecaySchedule.exponential(), -1)


# ---------------------------------------------------------------------------
# SphereParams


def test_sphere_params_default_cutoff():
    p = SphereParams(radius=300.0, dim=4096, population=40)
    assert p.cutoff == 20
    assert p.learning_ratio == 1.5


def test_sphere_params_validation():
    with pytest.raises(ValueError):
        SphereParams(radius=-1.0, dim=8, population=4)
    with pytest.raises(ValueError):
        SphereParams(radius=1.0, dim=0, population=4)
    with pytest.raises(ValueError):
        SphereParams(radius=1.0, dim=8, population=0)
    with pytest.raises(ValueError):
        SphereParams(radius=1.0, dim=8, population=4, cutoff=5)
    with pytest.raises(ValueError):
        SphereParams(radius=1.0, dim=8, population=4, learning_ratio=0.0)
