import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardcore import geometry as geo
from hardcore.exceptions import DomainError
from hardcore.regions import (
    Ball, Box, BoxUnion, Cap, CapUnion, Sphere, contains, measure, parse_region,
    region_from_description, sample_uniform, volume,
)

E1 = (1.0, 0.0, 0.0)


def test_volumes():
    assert volume(Box((2.0, 3.0))) == 6.0
    assert volume(Ball(geo.unit_volume_radius(5), dim=5)) == pytest.approx(1.0, abs=1e-12)
    union = BoxUnion((Box((1.0, 1.0)), Box((1.0, 1.0), lower=(5.0, 5.0))))
    assert volume(union) == 2.0
    with pytest.raises(DomainError):
        volume(Sphere(3))


def test_measures():
    assert measure(Sphere(3)) == 1.0
    assert measure(Cap(E1, math.pi / 2)) == pytest.approx(0.5)
    caps = CapUnion((Cap(E1, math.pi / 6), Cap((-1.0, 0.0, 0.0), math.pi / 6)))
    assert measure(caps) == pytest.approx(2 * (1 - math.cos(math.pi / 6)) / 2)


def test_overlapping_unions_rejected():
    with pytest.raises(DomainError):
        BoxUnion((Box((2.0, 2.0)), Box((2.0, 2.0), lower=(1.0, 1.0))))
    # touching faces are fine
    BoxUnion((Box((1.0, 1.0)), Box((1.0, 1.0), lower=(1.0, 0.0))))
    with pytest.raises(DomainError):
        CapUnion((Cap(E1, 0.5), Cap((0.0, 1.0, 0.0), 1.2)))


def test_contains_closed_boundaries():
    assert contains(Box((1.0, 1.0)), (0.5, 0.5))
    assert contains(Ball(1.0, dim=3), (1.0, 0.0, 0.0))
    p = (math.cos(math.pi / 3), math.sin(math.pi / 3), 0.0)
    assert contains(Cap(E1, math.pi / 3), p)
    assert not contains(Cap(E1, math.pi / 3 - 1e-6), p)
    mask = Box((1.0, 1.0)).contains(np.array([[0.5, 0.5], [1.5, 0.5]]))
    assert mask.tolist() == [True, False]


def test_contains_dimension_mismatch():
    with pytest.raises(DomainError):
        Box((1.0, 1.0)).contains((0.5, 0.5, 0.5))


def test_box_sample_mean():
    rng = np.random.default_rng(0)
    pts = sample_uniform(Box((1.0, 1.0)), rng, 1_000_000)
    sigma = math.sqrt(1 / 12 / len(pts))
    assert np.all(np.abs(pts.mean(axis=0) - 0.5) < 3 * sigma)


def test_sphere_sample_mean():
    rng = np.random.default_rng(1)
    pts = Sphere(3).sample(rng, 200_000)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)
    sigma = math.sqrt(1 / 3 / len(pts))
    assert np.all(np.abs(pts.mean(axis=0)) < 3 * sigma)


def test_cap_subcap_fraction():
    rng = np.random.default_rng(2)
    cap = Cap(E1, math.pi / 3)
    pts = cap.sample(rng, 200_000)
    inside = Cap(E1, math.pi / 6).contains(pts)
    expected = ((1 - math.cos(math.pi / 6)) / 2) / 0.25
    se = math.sqrt(expected * (1 - expected) / len(pts))
    assert abs(inside.mean() - expected) < 3 * se


def test_ball_radial_law():
    rng = np.random.default_rng(3)
    ball = Ball(2.0, center=(1.0, -1.0, 0.5, 0.0))
    pts = ball.sample(rng, 100_000)
    inner = Ball(1.0, center=ball.center).contains(pts)
    expected = 0.5 ** 4
    se = math.sqrt(expected * (1 - expected) / len(pts))
    assert abs(inner.mean() - expected) < 4 * se


REGIONS = [
    Box((2.0, 3.0)),
    Box((1.0, 2.0, 0.5), lower=(-1.0, 0.0, 4.0)),
    Ball(1.3, dim=3),
    BoxUnion((Box((1.0, 1.0)), Box((3.0, 0.5), lower=(2.0, 2.0)))),
    Sphere(4),
    Cap((0.0, 0.0, 1.0), 0.4),
    Cap((0.0, 1.0), 2.0),
    CapUnion((Cap(E1, 0.3), Cap((0.0, 0.0, -1.0), 0.9))),
]


@pytest.mark.parametrize("region", REGIONS, ids=lambda r: r.describe()["kind"])
def test_samples_are_members(region):
    rng = np.random.default_rng(4)
    pts = region.sample(rng, 10_000)
    assert pts.shape == (10_000, region.d)
    assert region.contains(pts).all()
    assert region.contains(region.sample(rng))


@pytest.mark.parametrize("region", REGIONS, ids=lambda r: r.describe()["kind"])
def test_describe_round_trip(region):
    assert region_from_description(region.describe()) == region


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sub=st.floats(0.1, 0.9))
def test_subregion_fraction_matches_measure_ratio(seed, sub):
    rng = np.random.default_rng(seed)
    outer = Box((2.0, 1.0))
    inner = Box((2.0 * sub, 1.0))
    n = 100_000
    frac = inner.contains(outer.sample(rng, n)).mean()
    se = math.sqrt(sub * (1 - sub) / n)
    assert abs(frac - sub) < 4 * se


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6), theta=st.floats(0.2, 2.8))
def test_cap_subcap_fraction_property(seed, d, theta):
    rng = np.random.default_rng(seed)
    center = np.zeros(d)
    center[-1] = 1.0
    n = 100_000
    pts = Cap(tuple(center), theta).sample(rng, n)
    expected = geo._cap_fraction(d, theta / 2) / geo._cap_fraction(d, theta)
    frac = Cap(tuple(center), theta / 2).contains(pts).mean()
    se = math.sqrt(expected * (1 - expected) / n)
    assert abs(frac - expected) < 4 * se


def test_parse_literals():
    assert parse_region("box:2x3") == Box((2.0, 3.0))
    assert parse_region("box:2", d=1) == Box((2.0,))
    assert parse_region("box:2", d=3) == Box((2.0, 2.0, 2.0))
    ball = parse_region("ball:r=1.5", d=4)
    assert ball.radius == 1.5 and ball.d == 4
    assert parse_region("sphere:d=4") == Sphere(4)
    cap = parse_region("cap:d=4,theta=1.0472")
    assert cap.d == 4 and cap.theta == pytest.approx(1.0472)
    for bad in ("disc:1", "box:axb", "ball:r=1", "cap:d=3"):
        with pytest.raises(DomainError):
            parse_region(bad)
    with pytest.raises(DomainError):
        parse_region("box:2x3", d=3)
