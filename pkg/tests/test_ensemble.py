import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardcore.ensemble import (
    Estimate, PartitionSeries, alpha_direct, alpha_series, alpha_series_stderr, alpha_via_T,
    circle_series, count_distribution, count_law, estimate_p_k, interval_series, log_z_of_lambda,
    poisson_truncation, pooled_chi2, series_from_pk, z_of_lambda, zhat_series,
)
from hardcore.exceptions import DomainError, TruncationInsufficient
from hardcore.regions import Box, Sphere
from hardcore.sampler import MinAngle, MinDistance

INTERVAL = Box((2.0,))
QUARTER = MinAngle(math.pi / 2)


def exact_interval_zhat(length, gap):
    # exact rational coefficients (L - (k-1) g)^k / k!
    out = [Fraction(1)]
    k = 1
    while length - (k - 1) * gap > 0:
        out.append(Fraction(length - (k - 1) * gap) ** k / math.factorial(k))
        k += 1
    return out


def test_interval_series_matches_rational_oracle():
    s = interval_series(2.0, 1.0)
    assert s.zhat.tolist() == [1.0, 2.0, 0.5]
    assert [float(z) for z in exact_interval_zhat(2, 1)] == s.zhat.tolist()
    assert z_of_lambda(s, 1.0) == 3.5
    assert alpha_series(s, 1.0) == pytest.approx(3 / 7, abs=1e-15)
    np.testing.assert_allclose(count_law(s, 1.0), [2 / 7, 4 / 7, 1 / 7], atol=1e-15)
    assert s.tail_zero and s.truncation_k == 2


def test_interval_series_longer_interval():
    s = interval_series(20.0, 1.0)
    exact = exact_interval_zhat(20, 1)
    np.testing.assert_allclose(s.zhat, [float(z) for z in exact], rtol=1e-13)


def test_circle_series_values():
    s = circle_series(math.pi / 2)
    np.testing.assert_allclose(s.p_k, [1, 1, 0.5, 1 / 16], atol=1e-15)
    np.testing.assert_allclose(s.zhat, [1, 1, 0.25, 1 / 96], atol=1e-15)
    assert s.spherical and s.normaliser == 1.0


def test_zhat_zero_is_one():
    with pytest.raises(DomainError):
        PartitionSeries(np.array([2.0, 1.0]), np.zeros(2), 1.0)


def test_small_fugacity_limits():
    s = interval_series(2.0, 1.0)
    assert z_of_lambda(s, 1e-9) == pytest.approx(1.0, abs=1e-8)
    assert alpha_series(s, 1e-6) == pytest.approx(1e-6, rel=1e-5)


def test_alpha_strictly_increasing():
    for s in (interval_series(2.0, 1.0), interval_series(7.3, 1.0), circle_series(1.0)):
        values = [alpha_series(s, lam) for lam in (0.5, 1, 2, 4)]
        assert all(b > a for a, b in zip(values, values[1:]))


@settings(max_examples=100, deadline=None)
@given(length=st.floats(0.5, 12.0), lam=st.floats(0.01, 5.0))
def test_z_below_poisson_majorant(length, lam):
    s = interval_series(length, 1.0)
    assert z_of_lambda(s, lam) <= math.exp(lam * length) * (1 + 1e-12)
    assert log_z_of_lambda(s, math.log(lam)) == pytest.approx(math.log(z_of_lambda(s, lam)), rel=1e-12)


def test_truncation_rule_and_error():
    k = poisson_truncation(2.0)
    from scipy import stats
    assert stats.poisson.sf(k, 2.0) < 1e-9 <= stats.poisson.sf(k - 1, 2.0)
    short = PartitionSeries(np.array([1.0, 2.0]), np.zeros(2), 2.0, tail_zero=False)
    with pytest.raises(TruncationInsufficient) as info:
        z_of_lambda(short, 1.0)
    assert info.value.tail_bound > 1e-9


def test_p_k_trivial_and_circle_pair():
    assert estimate_p_k(INTERVAL, 0).value == 1.0
    one = estimate_p_k(Sphere(2), 1, QUARTER)
    assert (one.value, one.stderr, one.n_samples) == (1.0, 0.0, 0)
    est = estimate_p_k(Sphere(2), 2, QUARTER, n=200_000, seed=1)
    assert abs(est.value - 0.5) <= 4 * est.stderr


def test_p_k_circle_triple_spacings():
    est = estimate_p_k(Sphere(2), 3, QUARTER, n=1_000_000, seed=2)
    assert abs(est.value - 1 / 16) <= 4 * est.stderr


def test_p_k_zero_has_one_sided_error():
    est = estimate_p_k(Sphere(2), 4, QUARTER, n=10_000, seed=3)
    assert est.value == 0.0
    assert est.stderr == pytest.approx(1 - 0.15865525393145707 ** (1 / 10_000))


def test_p_k_reproducible_across_streams():
    a = estimate_p_k(Box((3.0, 3.0)), 3, n=200_000, seed=4, streams=1)
    b = estimate_p_k(Box((3.0, 3.0)), 3, n=200_000, seed=4, streams=4)
    assert a.value == b.value


def test_zhat_series_interval_by_monte_carlo():
    s = zhat_series(INTERVAL, MinDistance(1.0), k_max=5, n_per_k=200_000, seed=5)
    assert s.tail_zero and s.truncation_k == 3
    assert s.zhat[0] == 1.0 and s.zhat[1] == 2.0
    assert abs(s.zhat[2] - 0.5) <= 4 * s.stderr[2]
    assert s.zhat[3] == 0.0 and s.stderr[3] > 0


def test_zhat_series_circle_records_degenerate_zero():
    s = zhat_series(Sphere(2), QUARTER, k_max=6, n_per_k=200_000, seed=6)
    assert s.truncation_k == 4 and s.zhat[4] == 0.0 and s.stderr[4] > 0
    exact = circle_series(math.pi / 2)
    for k in (2, 3):
        assert abs(s.zhat[k] - exact.zhat[k]) <= 4 * s.stderr[k]


def test_zhat_series_picks_truncation_from_lambda():
    s = zhat_series(Box((3.0, 3.0)), lam=0.5, n_per_k=20_000, seed=7)
    assert s.tail_zero or s.truncation_k == poisson_truncation(4.5)


def test_alpha_direct_interval():
    est = alpha_direct(INTERVAL, 1.0, 100_000, seed=8)
    assert est.within(3 / 7)
    assert est.params["lambda"] == 1.0 and est.n_samples == 100_000


def test_alpha_direct_circle_matches_series():
    exact = alpha_series(circle_series(math.pi / 2), 1.0)
    est = alpha_direct(Sphere(2), 1.0, 100_000, QUARTER, seed=9)
    assert est.within(exact)


def test_alpha_direct_tiny_fugacity():
    est = alpha_direct(Box((10.0,)), 1e-6, 100_000, seed=10)
    # with at most a handful of points the mean is lam within Poisson error
    assert abs(est.value - 1e-6) <= 4 * math.sqrt(1e-6 * 10 / 100_000) / 10


def test_alpha_via_T_interval():
    est = alpha_via_T(INTERVAL, 1.0, 50_000, seed=11)
    assert est.within(3 / 7)
    assert est.extras["lower_bound"] <= est.value
    assert 0 < est.extras["mean_t"] <= 2.0


def test_alpha_via_T_empty_configuration_path():
    # tiny outer fugacity: X is empty, T is the whole neighbourhood
    lam = 1e-7
    est = alpha_via_T(Box((10.0,)), lam, 2_000, seed=12)
    # v interior gives T of length 2; near the ends it is shorter, so Z_T ~ 1
    assert est.value == pytest.approx(lam, rel=1e-5)


def test_alpha_via_T_interval_in_long_box():
    # for lam = 1 and an interior v with X empty, the contribution is lam / 3.5
    s = interval_series(2.0, 1.0)
    assert 1.0 / z_of_lambda(s, 1.0) == pytest.approx(1 / 3.5)


@pytest.mark.slow
def test_estimator_triangle_circle():
    exact = alpha_series(circle_series(math.pi / 2), 1.0)
    est = alpha_via_T(Sphere(2), 1.0, 20_000, constraint=QUARTER, seed=13)
    assert est.within(exact)
    # sphere neighbourhood identity: s_2(pi/2) * alpha = E[alpha_T]
    occ, se = est.extras["mean_occupancy_T"], est.extras["mean_occupancy_T_stderr"]
    assert abs(occ - 0.5 * exact) <= 4 * se
    assert est.extras["lower_bound"] <= exact


@pytest.mark.slow
def test_estimator_triangle_square():
    region = Box((3.0, 3.0))
    series = zhat_series(region, lam=0.5, n_per_k=200_000, seed=14)
    a_series = alpha_series(series, 0.5)
    se_series = alpha_series_stderr(series, 0.5)
    direct = alpha_direct(region, 0.5, 100_000, seed=15)
    via_t = alpha_via_T(region, 0.5, 5_000, seed=16)
    assert direct.within(a_series, other_stderr=se_series)
    assert via_t.within(direct.value, other_stderr=direct.stderr)
    # Euclidean neighbourhood inequality with factor 2^-d
    assert direct.value >= 0.25 * via_t.extras["mean_occupancy_T"] - 4 * via_t.extras["mean_occupancy_T_stderr"]


def test_alpha_direct_monotone_in_lambda():
    values = [alpha_direct(Box((1.5,)), lam, 40_000, seed=17 + i) for i, lam in enumerate((0.5, 1, 2, 4))]
    for a, b in zip(values, values[1:]):
        assert b.value >= a.value - 4 * math.hypot(a.stderr, b.stderr)


def test_count_distribution_interval():
    s = interval_series(2.0, 1.0)
    dist = count_distribution(INTERVAL, 1.0, 100_000, seed=18, series=s)
    assert dist.p_value > 1e-3 and dist.dof == 2
    np.testing.assert_allclose(dist.expected, [2 / 7, 4 / 7, 1 / 7])


def test_count_distribution_circle_and_tiny_lambda():
    s = circle_series(math.pi / 2)
    dist = count_distribution(Sphere(2), 2.0, 50_000, QUARTER, seed=19, series=s)
    assert dist.p_value > 1e-3
    tiny = count_distribution(INTERVAL, 1e-9, 1_000, seed=20)
    assert tiny.observed.tolist() == [1_000]


def test_pooled_chi2_merges_small_cells():
    chi2, dof, p = pooled_chi2([50, 40, 9, 1], [0.5, 0.4, 0.09, 0.01])
    assert dof == 2 and p > 0.9
    chi2, dof, p = pooled_chi2([100, 0], [0.5, 0.5])
    assert p < 1e-10


def test_estimate_serialises():
    est = Estimate(1.0, 0.1, 10, 3, 1, {"a": 1})
    assert est.to_dict()["params"] == {"a": 1}
    s = series_from_pk([1, 1, 0.5], 2.0)
    assert s.to_dict()["zhat"] == [1.0, 2.0, 1.0]
