"""Partition functions, count laws and three estimators of the expected density.

The canonical partition function is ``zhat[k] = p_k * m^k / k!`` where ``m``
is the measure of the region and ``p_k`` the probability that ``k``
independent uniform points satisfy the hard-core constraint.  The grand
canonical one is ``Z(lam) = sum_k lam^k zhat[k]``.

The expected density is estimated three ways that share no code path:

* ``alpha_series``: ``lam * (log Z)'`` from an (exact or estimated) series,
* ``alpha_direct``: mean size of exact grand canonical samples,
* ``alpha_via_T``: ``lam * E[1 / Z_T(lam)]`` over a sample ``X`` and a
  uniform point ``v``, with the partition function of the externally
  uncovered set estimated from scratch for every pair.

Euclidean densities are normalised by volume.  On spherical regions the
density is the expected number of points, as for the hard cap model.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from . import geometry as geo
from . import rng as rngmod
from ._validation import check_fugacity, check_positive_int
from .exceptions import DomainError, TruncationInsufficient
from .regions import Region, sample_cap_points
from .sampler import (
    DEFAULT_BUDGET, MinAngle, MinDistance, _hardcore_rows, default_constraint, sample_batch,
)

REL_TOL = 1e-9
# one-sided upper limit at the one-sigma level for a zero count: 1 - Phi(-1)^(1/n)
_ONE_SIGMA_TAIL = 0.15865525393145707
P_K_BLOCK = 1 << 16


@dataclass
class Estimate:
    """Monte Carlo estimate with its standard error and the settings that reproduce it."""

    value: float
    stderr: float
    n_samples: int
    seed: int
    streams: int = 1
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def within(self, target, sigmas=4.0, other_stderr=0.0):
        return abs(self.value - target) <= sigmas * math.hypot(self.stderr, other_stderr)


@dataclass
class PartitionSeries:
    """Truncated canonical partition function ``zhat[0..truncation_k]``.

    ``tail_zero`` records that every coefficient past the truncation is zero
    (exact series, or an estimate that reached ``p_k = 0``).
    """

    zhat: np.ndarray
    stderr: np.ndarray
    measure: float
    spherical: bool = False
    tail_zero: bool = False
    region: dict = None
    n_per_k: int = 0

    def __post_init__(self):
        self.zhat = np.asarray(self.zhat, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if self.zhat[0] != 1.0:
            raise DomainError("zhat[0] must equal 1")
        if np.any(self.zhat < 0) or np.any(self.stderr < 0):
            raise DomainError("series coefficients and errors must be non-negative")

    @property
    def truncation_k(self):
        return len(self.zhat) - 1

    @property
    def normaliser(self):
        """Divisor turning an expected count into a density."""
        return 1.0 if self.spherical else self.measure

    @property
    def p_k(self):
        k = np.arange(len(self.zhat))
        with np.errstate(divide="ignore"):
            return np.exp(np.log(self.zhat) + gammaln(k + 1) - k * math.log(self.measure))

    def terms(self, lam):
        return lam ** np.arange(len(self.zhat)) * self.zhat

    def tail_bound(self, lam):
        """Upper bound on the dropped mass ``sum_{k > K} lam^k zhat[k]``."""
        if self.tail_zero:
            return 0.0
        mu = lam * self.measure
        return math.exp(mu + stats.poisson.logsf(self.truncation_k, mu))

    def to_dict(self):
        return {
            "zhat": self.zhat.tolist(), "stderr": self.stderr.tolist(), "measure": self.measure,
            "spherical": self.spherical, "tail_zero": self.tail_zero, "region": self.region,
            "n_per_k": self.n_per_k,
        }


def resolve_constraint(region, constraint=None):
    """``None`` gives the model's default; a bare number is an angle on the sphere, a distance otherwise."""
    if constraint is None:
        return default_constraint(region)
    if isinstance(constraint, (MinDistance, MinAngle)):
        return constraint
    return MinAngle(constraint) if region.spherical else MinDistance(constraint)


def poisson_truncation(mean, rel_tol=REL_TOL):
    """Smallest ``K`` whose Poisson(mean) upper tail ``P[N > K]`` is below ``rel_tol``."""
    k = max(0, int(mean))
    while stats.poisson.sf(k, mean) >= rel_tol:
        k += 1
    return k


def series_from_pk(p, measure, spherical=False, stderr_p=None, tail_zero=True, region=None, n_per_k=0):
    p = np.asarray(p, dtype=float)
    k = np.arange(len(p))
    scale = np.exp(k * math.log(measure) - gammaln(k + 1))
    se = np.zeros_like(p) if stderr_p is None else np.asarray(stderr_p, dtype=float)
    return PartitionSeries(p * scale, se * scale, float(measure), spherical, tail_zero, region, n_per_k)


def interval_series(length, gap):
    """Exact series for points of ``[0, length]`` at mutual distance ``>= gap``.

    ``k`` points fit with probability ``((length - (k-1) gap) / length)^k``.
    """
    p = [1.0]
    k = 1
    while length - (k - 1) * gap > 0:
        p.append(((length - (k - 1) * gap) / length) ** k)
        k += 1
    return series_from_pk(p, length, region={"kind": "box", "sides": [length]})


def circle_series(theta):
    """Exact series on the circle for angular separation ``theta``.

    ``p_k = (1 - k theta / 2pi)^(k-1)`` by the circular spacings law.
    """
    p = [1.0]
    k = 1
    while 1 - k * theta / (2 * math.pi) > 0:
        p.append((1 - k * theta / (2 * math.pi)) ** (k - 1))
        k += 1
    return series_from_pk(p, 1.0, spherical=True, region={"kind": "sphere", "d": 2})


def _tuples_ok(points, constraint):
    """``points (..., k, d)``: which k-tuples are pairwise compatible."""
    k = points.shape[-2]
    conf = constraint.conflicts(points, points)
    conf &= np.triu(np.ones((k, k), dtype=bool), 1)
    return ~conf.any(axis=(-1, -2))


def estimate_p_k(region, k, constraint=None, n=100_000, seed=None, streams=1):
    """Probability that ``k`` independent uniform points of ``region`` are compatible."""
    if k < 0:
        raise DomainError("k must be non-negative")
    n = check_positive_int(n, "n")
    constraint = resolve_constraint(region, constraint)
    seed = rngmod.resolve_seed(seed)
    params = {"k": int(k), "region": region.describe(), "constraint": constraint.describe()}
    if k <= 1:
        return Estimate(1.0, 0.0, 0, seed, streams, params)

    def block(rng, size, _):
        pts = region.sample(rng, size * k).reshape(size, k, region.d)
        return int(_tuples_ok(pts, constraint).sum())

    block_size = max(1, P_K_BLOCK // k)
    hits = sum(rngmod.map_blocks(block, n, seed, f"p_k:{k}", streams, block_size))
    p = hits / n
    se = math.sqrt(p * (1 - p) / n) if hits else 1.0 - _ONE_SIGMA_TAIL ** (1.0 / n)
    return Estimate(p, se, n, seed, streams, params, {"hits": hits})


def zhat_series(region, constraint=None, k_max=None, n_per_k=100_000, seed=None, lam=None,
                rel_tol=REL_TOL, streams=1):
    """Estimate ``zhat[0..k_max]``; ``k_max`` defaults to the Poisson truncation at ``lam``.

    Estimation stops at the first ``k`` whose estimate of ``p_k`` is zero,
    since no larger configuration can then be compatible either.
    """
    constraint = resolve_constraint(region, constraint)
    if k_max is None:
        if lam is None:
            raise DomainError("give k_max or a fugacity to choose it")
        k_max = poisson_truncation(check_fugacity(lam) * region.measure, rel_tol)
    seed = rngmod.resolve_seed(seed)
    p, se = [1.0], [0.0]
    tail_zero = False
    for k in range(1, k_max + 1):
        est = estimate_p_k(region, k, constraint, n_per_k, seed, streams)
        p.append(est.value)
        se.append(est.stderr)
        if est.value == 0.0:
            tail_zero = True
            break
    return series_from_pk(p, region.measure, region.spherical, se, tail_zero,
                          region.describe(), n_per_k)


def z_of_lambda(series, lam, rel_tol=REL_TOL):
    """``Z(lam)``; raises :class:`TruncationInsufficient` if the dropped tail may exceed ``rel_tol``."""
    lam = check_fugacity(lam)
    z = float(series.terms(lam).sum())
    tail = series.tail_bound(lam) / z
    if tail > rel_tol:
        raise TruncationInsufficient(f"series truncated at k={series.truncation_k} leaves a relative "
                                     f"tail of up to {tail:.3g} at lambda={lam}", tail)
    if z > math.exp(lam * series.measure) * (1 + 1e-12):
        raise ArithmeticError("partition function exceeds its Poisson majorant")
    return z


def log_z_of_lambda(series, log_lam, rel_tol=REL_TOL):
    """``log Z`` for a fugacity given as its logarithm."""
    k = np.arange(len(series.zhat))
    nz = series.zhat > 0
    log_z = float(logsumexp(k[nz] * log_lam + np.log(series.zhat[nz])))
    if not series.tail_zero:
        mu = math.exp(log_lam) * series.measure
        log_tail = mu + stats.poisson.logsf(series.truncation_k, mu) - log_z
        if log_tail > math.log(rel_tol):
            raise TruncationInsufficient("series too short for this fugacity", math.exp(log_tail))
    return log_z


def count_law(series, lam, rel_tol=REL_TOL):
    """``P[|X| = k] = lam^k zhat[k] / Z(lam)`` for ``k <= truncation_k``."""
    return series.terms(lam) / z_of_lambda(series, lam, rel_tol)


def alpha_series(series, lam, vol=None, rel_tol=REL_TOL):
    """``lam (log Z)'``, divided by the volume for Euclidean regions."""
    probs = count_law(series, lam, rel_tol)
    vol = series.normaliser if vol is None else vol
    return float(np.arange(len(probs)) @ probs) / vol


def alpha_series_stderr(series, lam):
    """Delta-method error of :func:`alpha_series` from the coefficient errors."""
    probs = count_law(series, lam)
    k = np.arange(len(probs))
    mean = k @ probs
    grad = lam ** k * (k - mean) / z_of_lambda(series, lam)
    return float(math.sqrt(np.sum((grad * series.stderr) ** 2))) / series.normaliser


def alpha_direct(region, lam, n, constraint=None, seed=None, streams=1, budget=DEFAULT_BUDGET):
    """Sample mean of ``|X|`` (over the volume when Euclidean) for ``n`` exact samples."""
    constraint = resolve_constraint(region, constraint)
    seed = rngmod.resolve_seed(seed)
    counts = sample_batch(region, lam, n, seed, constraint, streams=streams, budget=budget).counts
    norm = 1.0 if region.spherical else region.measure
    return Estimate(float(counts.mean() / norm), float(counts.std(ddof=1) / math.sqrt(n) / norm)
                    if n > 1 else math.inf, n, seed, streams,
                    {"lambda": lam, "region": region.describe(), "constraint": constraint.describe()},
                    {"counts": np.bincount(counts).tolist()})


@dataclass
class CountDistribution:
    observed: np.ndarray
    expected: np.ndarray = None
    chi2: float = None
    dof: int = None
    p_value: float = None

    @property
    def frequencies(self):
        return self.observed / self.observed.sum()


def pooled_chi2(observed, expected_probs, min_expected=5.0):
    """Goodness-of-fit with adjacent cells merged until each expects ``min_expected``.

    Returns ``(chi2, dof, p_value)``; observations beyond the last
    predicted cell are added to it.
    """
    observed = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    n = observed.sum()
    width = max(len(observed), len(probs))
    obs = np.zeros(width)
    obs[:len(observed)] = observed
    exp = np.zeros(width)
    exp[:len(probs)] = probs * n
    cells_o, cells_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            cells_o.append(acc_o)
            cells_e.append(acc_e)
            acc_o = acc_e = 0.0
    if cells_e:
        cells_o[-1] += acc_o
        cells_e[-1] += acc_e
    else:
        cells_o, cells_e = [acc_o], [acc_e]
    cells_o, cells_e = np.array(cells_o), np.array(cells_e)
    if len(cells_e) < 2:
        return 0.0, 0, 1.0
    chi2 = float(np.sum((cells_o - cells_e) ** 2 / cells_e))
    dof = len(cells_e) - 1
    return chi2, dof, float(stats.chi2.sf(chi2, dof))


def count_distribution(region, lam, n, constraint=None, seed=None, series=None, streams=1,
                       budget=DEFAULT_BUDGET):
    """Empirical law of ``|X|``; with a series, also the chi-square fit to its prediction."""
    constraint = resolve_constraint(region, constraint)
    counts = sample_batch(region, lam, n, rngmod.resolve_seed(seed), constraint,
                          streams=streams, budget=budget).counts
    observed = np.bincount(counts)
    if series is None:
        return CountDistribution(observed)
    probs = count_law(series, lam)
    chi2, dof, pv = pooled_chi2(observed, probs)
    return CountDistribution(observed, probs, chi2, dof, pv)


# nested estimator

def _householder_to(vectors, d):
    """Reflections taking ``e_d`` to each row of ``vectors``: returns ``(w, scale)``."""
    e = np.zeros(d)
    e[-1] = 1.0
    w = e - vectors
    ww = np.einsum("ij,ij->i", w, w)
    scale = np.where(ww > 1e-30, 2.0 / np.where(ww > 1e-30, ww, 1.0), 0.0)
    return w, scale


def _neighbourhood_sampler(constraint, centres, d):
    """Uniform sampler of the closed neighbourhoods (ball or cap) around each centre."""
    if isinstance(constraint, MinAngle):
        w, scale = _householder_to(centres, d)
        e = np.zeros(d)
        e[-1] = 1.0

        def draw(rng, m):
            base = sample_cap_points(rng, e, constraint.theta, len(centres) * m).reshape(len(centres), m, d)
            proj = np.einsum("bmd,bd->bm", base, w)
            return base - (scale[:, None] * proj)[..., None] * w[:, None, :]

        return draw, geo._cap_fraction(d, constraint.theta)

    radius = constraint.min_dist

    def draw(rng, m):
        g = rng.standard_normal((len(centres), m, d))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        rad = radius * rng.random((len(centres), m, 1)) ** (1.0 / d)
        return centres[:, None, :] + rad * g

    return draw, math.exp(geo.log_unit_ball_volume(d) + d * math.log(radius))


def uncovered_partition_rows(rng, region, constraint, lam, X, v, n_inner, rel_tol=REL_TOL):
    """Per-row estimates of ``zhat`` for ``T(X_i, v_i)`` from two independent halves.

    ``X`` is a :class:`PointBatch` and ``v`` an ``(rows, d)`` array.  For
    each ``k``, about ``n_inner * k^2`` independent k-tuples are drawn in the
    closed neighbourhood of ``v``; a tuple counts when all its points lie
    in ``T`` and are mutually compatible, which makes every coefficient
    unbiased.  The tuples are split in two halves so callers can remove the
    leading bias of nonlinear functions of the series.

    Returns ``(zhat (2, rows, K+1), neighbourhood measure, closed)`` where
    ``closed`` says every row reached an all-zero coefficient.
    """
    rows, d = v.shape
    draw, m_nb = _neighbourhood_sampler(constraint, v, d)
    ext_mask = X.mask
    if X.points.shape[1]:
        ext_mask = X.mask & ~constraint.conflicts(X.points, v[:, None, :])[..., 0]
    k_cap = poisson_truncation(lam * m_nb, rel_tol)
    zhat = [np.ones((2, rows))]
    for k in range(1, k_cap + 1):
        half = max(1, -(-n_inner * k * k // 2))
        m = 2 * half
        pts = draw(rng, m * k).reshape(rows, m, k, d)
        member = region._contains(pts.reshape(-1, d)).reshape(rows, m, k)
        member &= constraint.conflicts(pts, v[:, None, None, :])[..., 0]
        if ext_mask.shape[1]:
            blocked = constraint.conflicts(pts.reshape(rows, m * k, d), X.points)
            blocked &= ext_mask[:, None, :]
            member &= ~blocked.any(axis=-1).reshape(rows, m, k)
        ok = member.all(axis=-1)
        if k > 1:
            ok &= _tuples_ok(pts, constraint)
        frac = ok.reshape(rows, 2, half).mean(axis=2).T
        zhat.append(frac * math.exp(k * math.log(m_nb) - math.lgamma(k + 1)))
        if not frac.any():
            return np.stack(zhat, axis=2), m_nb, True
    return np.stack(zhat, axis=2), m_nb, False


def _jackknife(fn, halves):
    """Split-half jackknife: ``2 f(mean) - mean(f(half))`` cancels the ``O(1/n)`` bias."""
    return 2.0 * fn(halves.mean(axis=0)) - 0.5 * (fn(halves[0]) + fn(halves[1]))


def alpha_via_T(region, lam, n_outer, n_inner=24, constraint=None, seed=None, streams=1,
                budget=DEFAULT_BUDGET, rel_tol=REL_TOL, block_size=1024):
    """``lam * E[1 / Z_T(lam)]`` over exact samples ``X`` and uniform ``v``.

    Each inner series comes from fresh tuples, and the nonlinear functions
    of it are split-half jackknifed so the nesting bias is ``O(1/n_inner^2)``.
    ``extras`` carries, from the same draws, the lower bound
    ``lam * E[exp(-lam t)]`` and the mean occupancy ``E[lam (log Z_T)']``
    of the uncovered set, all with standard errors.
    """
    lam = check_fugacity(lam)
    n_outer = check_positive_int(n_outer, "n_outer")
    constraint = resolve_constraint(region, constraint)
    seed = rngmod.resolve_seed(seed)

    def block(rng, size, _):
        X = _hardcore_rows(rng, region, lam, constraint, size, budget=budget)
        v = region.sample(rng, size)
        halves, m_nb, closed = uncovered_partition_rows(rng, region, constraint, lam, X, v, n_inner, rel_tol)
        k = np.arange(halves.shape[2])
        weights = lam ** k
        if not closed:
            z_min = (halves.mean(axis=0) @ weights).min()
            tail = math.exp(lam * m_nb + stats.poisson.logsf(len(k) - 1, lam * m_nb)) / z_min
            if tail > rel_tol:
                raise TruncationInsufficient("inner series too short", tail)
        inv = _jackknife(lambda z: lam / (z @ weights), halves)
        low = _jackknife(lambda z: lam * np.exp(-lam * z[:, 1]), halves)
        occ = _jackknife(lambda z: (z @ (weights * k)) / (z @ weights), halves)
        stack = np.stack([inv, low, occ, halves[:, :, 1].mean(axis=0)])
        return stack.sum(axis=1), (stack ** 2).sum(axis=1)

    parts = rngmod.map_blocks(block, n_outer, seed, "alpha_T", streams, block_size)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n_outer
    var = np.maximum(s2 / n_outer - mean ** 2, 0.0) * n_outer / max(n_outer - 1, 1)
    se = np.sqrt(var / n_outer)
    scale = region.measure if region.spherical else 1.0
    params = {"lambda": lam, "region": region.describe(), "constraint": constraint.describe(),
              "n_inner": n_inner}
    extras = {
        "lower_bound": float(mean[1] * scale), "lower_bound_stderr": float(se[1] * scale),
        "mean_occupancy_T": float(mean[2]), "mean_occupancy_T_stderr": float(se[2]),
        "mean_t": float(mean[3]), "mean_t_stderr": float(se[3]),
    }
    return Estimate(float(mean[0] * scale), float(se[0] * scale), n_outer, seed, streams, params, extras)
