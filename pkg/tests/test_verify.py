import json
import math

import numpy as np
import pytest

from hardcore import geometry as geo
from hardcore import verify as V
from hardcore.ensemble import Estimate, alpha_series, circle_series, interval_series
from hardcore.exceptions import DomainError
from hardcore.regions import Ball, Box, BoxUnion, Sphere
from hardcore.rng import stream
from hardcore.sampler import MinAngle, MinDistance


def test_spatial_markov_interval_passes_and_control_fails():
    good = V.verify_spatial_markov(Box((4.0,)), Box((2.0,)), 1.0, 20_000, seed=1)
    assert good.passed and good.p_value > 1e-3
    assert good.statistics["ks_p_value"] > 1e-3
    bad = V.verify_spatial_markov(Box((4.0,)), Box((2.0,)), 1.0, 20_000, seed=1, resample_blocked=False)
    assert not bad.passed and bad.p_value < 1e-6


def test_spatial_markov_tiny_fugacity_is_trivial():
    r = V.verify_spatial_markov(Box((4.0,)), Box((2.0,)), 1e-12, 2_000, seed=2)
    assert r.passed and r.statistics["mean_inside"] == [0.0, 0.0]


def test_spatial_markov_rejects_bad_subregion():
    with pytest.raises(DomainError):
        V.verify_spatial_markov(Box((4.0,)), Box((2.0,), (3.0,)), 1.0, 100, seed=3)
    with pytest.raises(DomainError):
        V.verify_spatial_markov(Box((4.0,)), Box((4.0,)), 1.0, 100, seed=3)


def test_joint_count_table_pools_sparse_cells():
    cx = np.array([[0, 0]] * 50 + [[1, 0]] * 50 + [[3, 3]])
    cy = np.array([[0, 0]] * 48 + [[1, 0]] * 52)
    table, keys = V._joint_count_table(cx, cy)
    assert keys == [(0, 0), (1, 0), "pooled"]
    assert table.sum() == 201


def test_overlap_functional_interval_oracle():
    # T = [0, L], 2 r_1 = 1: P(|u - w| <= 1) = 1 - (1 - 1/L)^2, so f(T) = 2L - 1
    f, se = V.overlap_functional(Box((3.0,)), 400_000, seed=4)
    assert abs(f - 5.0) <= 4 * se


def test_rearrangement_ball_is_equality_case():
    ball = Ball(1.2 * geo.unit_volume_radius(2), dim=2)
    r = V.verify_rearrangement_euclid(ball, 200_000, seed=5)
    assert r.passed and abs(r.worst_margin) < 4


def test_rearrangement_far_components_strictly_below():
    far = BoxUnion((Box((1.0, 1.0)), Box((1.0, 1.0), (10.0, 10.0))))
    r = V.verify_rearrangement_euclid(far, 200_000, seed=6)
    assert r.passed and r.worst_margin > 4


def test_rearrangement_random_unions():
    r = V.verify_rearrangement_suite(trials=8, n=50_000, seed=7)
    assert r.trials == 8 and r.violations == 0


def test_random_box_union_is_disjoint_and_scalable():
    u = V.random_box_union(3, stream(1, 2))
    scaled = V.scale_box_union(u, 2.0)
    assert scaled.measure == pytest.approx(8 * u.measure)


def test_intersection_bound_arithmetic():
    assert V.euclid_intersection_bound(2.0, 2) == pytest.approx(4.0, abs=1e-14)
    assert V.euclid_intersection_bound(4.0, 2) == pytest.approx(6.0, abs=1e-14)


def test_intersection_bound_holds():
    r = V.verify_intersection_bound_euclid(2.0, 2, n=50_000, seed=8, trials=2)
    assert r.passed and r.trials == 3
    disc = r.statistics["cases"][0]
    assert disc["shape"] == "ball" and disc["mean_intersection"] < 4
    # at t = 2^d the ball is B_{2 r_d}; the mean intersection is below its area 4
    top = V.verify_intersection_bound_euclid(4.0, 2, n=50_000, seed=9, trials=1)
    assert top.passed and top.statistics["cases"][0]["mean_intersection"] < 4
    with pytest.raises(DomainError):
        V.verify_intersection_bound_euclid(1.0, 2)


def test_cap_intersection_bound_cases():
    theta = math.pi / 3
    lo = geo.theta_prime(theta)
    r = V.verify_cap_intersection_bound(lo, theta, 3, 50_000, seed=10)
    assert r.statistics["bound"] == pytest.approx(2 * geo.cap_measure(3, lo), rel=1e-9)
    r = V.verify_cap_intersection_bound(theta, theta, 3, 50_000, seed=11)
    assert r.statistics["bound"] == pytest.approx(1 - math.cos(geo.q_of_theta(theta)), rel=1e-12)
    assert r.passed
    with pytest.raises(DomainError):
        V.verify_cap_intersection_bound(0.1, theta, 3)


def test_cap_intersection_small_grid():
    grid = V.cap_intersection_grid(d_values=(2, 4, 6), n_alpha=3)
    r = V.verify_cap_intersection_suite(grid, n=20_000, seed=12)
    assert r.trials == len(grid) and r.violations == 0


def test_minimax_center_recovers_a_known_cap():
    rng = np.random.default_rng(13)
    c = np.array([0.3, -0.2, 0.9])
    c /= np.linalg.norm(c)
    r = 0.7
    # boundary circle of the cap plus interior points
    w = rng.standard_normal((400, 3))
    w -= np.outer(w @ c, c)
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    rim = math.cos(r) * c + math.sin(r) * w
    inner = math.cos(0.3) * c + math.sin(0.3) * w[:100]
    center, radius, lower, steps, reason = V.minimax_center(np.vstack([rim, inner]))
    assert radius == pytest.approx(r, abs=1e-8)
    assert lower <= radius + 1e-12
    assert np.linalg.norm(center - c) < 1e-6


def test_minimax_center_two_points():
    a, b = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    center, radius, *_ = V.minimax_center(np.vstack([a, b]))
    assert radius == pytest.approx(math.pi / 4, abs=1e-12)


def test_cap_containment_extremes():
    theta = math.pi / 3
    r = V.verify_cap_containment(theta, theta, 3, 20_000, seed=14)
    assert r.passed and r.statistics["radius"] <= geo.q_of_theta(theta) + 1e-6
    lo = geo.theta_prime(theta)
    r = V.verify_cap_containment(lo, theta, 3, 20_000, seed=15)
    # at tau = theta' the containing radius is theta' itself
    assert r.passed and r.statistics["radius"] == pytest.approx(lo, abs=5e-3)


def test_lens_containment():
    for x in (math.sqrt(2.0), 1.7, 2.0):
        r = V.verify_lens_containment(x, 3, 20_000, seed=16)
        assert r.violations == 0 and r.trials == 20_000


def test_occupancy_circle_example_from_exact_series():
    s = circle_series(math.pi / 2)
    exact = Estimate(alpha_series(s, 20.0), 0.0, 0, 0, 1)
    r = V.verify_occupancy_bound(Sphere(2), 20.0, 3, 0.5, seed=17, constraint=MinAngle(math.pi / 2),
                                 series=s, size_estimate=exact, min_k=1)
    assert r.statistics["bound"] == pytest.approx(0.09375, abs=1e-15)
    assert r.passed and r.statistics["mean_size"] > 0.09375


def test_occupancy_small_k_and_beta_one():
    s = interval_series(2.0, 1.0)
    r = V.verify_occupancy_bound(Box((2.0,)), 1.0, 1, 0.5, 20_000, seed=18, series=s, min_k=1)
    assert r.passed and r.statistics["bound"] == 0.5
    assert r.statistics["mean_size"] == pytest.approx(6 / 7, abs=4 * r.statistics["mean_size_stderr"])
    r = V.verify_occupancy_bound(Box((2.0,)), 1.0, 2, 1.0, 2_000, seed=19, series=s)
    assert r.statistics["bound"] == 0.0 and r.passed and not r.statistics["enforced"]
    with pytest.raises(DomainError):
        V.verify_occupancy_bound(Box((2.0,)), 1.0, 3, 0.5, 100, seed=19)


def test_pk_near_one_cases():
    r = V.verify_pk_near_one(8, math.pi / 3, 0.1, 10_000, seed=20)
    assert r.statistics["k"] == 1 and r.statistics["p_k"] == 1.0
    r = V.verify_pk_near_one(8, math.pi / 3, k=2, n=50_000, seed=21)
    assert 0.4 < r.statistics["p_k"] < 0.65
    with pytest.raises(DomainError):
        V.verify_pk_near_one(8, math.pi / 3, c=0.3)


def test_pk_trend_increases_at_fixed_k():
    r = V.verify_pk_trend((4, 8, 12), k=2, n=50_000, seed=22, require_half=False)
    p = r.statistics["p_k"]
    assert r.passed and p[0] < p[1] < p[2]


def test_report_merge_and_json():
    a = V.VerificationReport("x", 2, 0, 1.5, {"p_value": 0.2, "margin_units": "u"}, 1)
    b = V.VerificationReport("x", 3, 1, -5.0, {"p_value": 0.01}, 1)
    m = V.VerificationReport.merge("x", [a, b], 1)
    assert (m.trials, m.violations, m.worst_margin, m.p_value) == (5, 1, -5.0, 0.01)
    d = V.VerificationReport("y", 1, 0, math.inf, {}, 2).to_dict()
    assert d["worst_margin"] is None and d["passed"]
    json.dumps(d, allow_nan=False)


def test_unknown_suite():
    with pytest.raises(DomainError):
        V.run_suite("nope", seed=1)
