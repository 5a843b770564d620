"""Monte Carlo checks of the structural lemmas behind the density bounds.

Every check returns a :class:`VerificationReport`.  Inequalities are tested
with a one-sided slack of ``SIGMAS`` standard errors coming from Monte Carlo
error only; deterministic containment checks use a fixed absolute tolerance.
``worst_margin`` is always "bound minus observed" in the units stated in
``statistics["margin_units"]``, so negative values point at the tightest case
and a violation is a margin below the allowed slack.

Statements about ``d -> infinity`` are only checked as finite-``d`` trends.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import geometry as geo
from . import rng as rngmod
from ._validation import check_dim, check_fugacity, check_open_angle, check_positive_int
from .ensemble import alpha_direct, alpha_series, circle_series, estimate_p_k, interval_series
from .exceptions import DomainError
from .regions import Ball, Box, BoxUnion, Cap, Sphere
from .sampler import (
    DEFAULT_BUDGET, MinAngle, MinDistance, PointBatch, _hardcore_rows, default_constraint,
)

SIGMAS = 4.0
SIGNIFICANCE = 1e-3
CONTAINMENT_TOL = 1e-6
CENTER_TOL = 1e-9
CENTER_MAX_STEPS = 10_000
OCCUPANCY_MIN_K = 10
PAIR_BLOCK = 1 << 16


@dataclass
class VerificationReport:
    lemma_id: str
    trials: int
    violations: int
    worst_margin: float
    statistics: dict = field(default_factory=dict)
    seed: int = None

    @property
    def passed(self):
        return self.violations == 0

    @property
    def p_value(self):
        return self.statistics.get("p_value")

    def to_dict(self):
        """Plain dict; an infinite margin (exact comparison, no MC error) becomes None."""
        out = asdict(self)
        if not math.isfinite(out["worst_margin"]):
            if math.isnan(out["worst_margin"]):
                raise ValueError(f"{self.lemma_id}: margin is NaN")
            out["worst_margin"] = None
        out["passed"] = self.passed
        return out

    @classmethod
    def merge(cls, lemma_id, reports, seed=None, **statistics):
        """Sum trials and violations, keep the smallest margin and the per-trial details."""
        reports = list(reports)
        stats_out = {"margin_units": reports[0].statistics.get("margin_units")} if reports else {}
        pvals = [r.p_value for r in reports if r.p_value is not None]
        if pvals:
            stats_out["p_value"] = min(pvals)
        stats_out.update(statistics)
        stats_out["cases"] = [r.statistics for r in reports]
        return cls(lemma_id, sum(r.trials for r in reports), sum(r.violations for r in reports),
                   min((r.worst_margin for r in reports), default=math.inf), stats_out, seed)


def _z_margin(bound, estimate, stderr):
    """Signed distance ``bound - estimate`` in standard errors (inf when both are exact and fine)."""
    gap = bound - estimate
    if stderr > 0:
        return gap / stderr
    return math.inf if gap >= 0 else -math.inf


# ---------------------------------------------------------------------------
# spatial Markov property

def _outside_batch(batch, inside):
    """Points of each row lying outside the sub-region, as a PointBatch."""
    keep = batch.mask & ~inside
    return PointBatch(batch.points, keep)


def _inside_mask(batch, sub):
    if batch.points.shape[1] == 0:
        return np.zeros(batch.mask.shape, dtype=bool)
    flat = batch.points.reshape(-1, batch.points.shape[-1])
    return sub.contains(flat).reshape(batch.mask.shape) & batch.mask


def _closest_pair(points, mask, constraint):
    """Smallest separation among masked points of each row, NaN for rows with fewer than two."""
    sep = constraint.separation(points, points)
    k = points.shape[1]
    valid = mask[:, :, None] & mask[:, None, :] & ~np.eye(k, dtype=bool)
    sep = np.where(valid, sep, np.inf)
    out = sep.min(axis=(1, 2)) if k else np.full(len(points), np.inf)
    return np.where(np.isfinite(out), out, np.nan)


def _markov_block(rng, size, region, sub, lam, constraint, budget, resample_blocked=True):
    x = _hardcore_rows(rng, region, lam, constraint, size, budget=budget)
    x2 = _hardcore_rows(rng, region, lam, constraint, size, budget=budget)
    in2 = _inside_mask(x2, sub)
    outside = _outside_batch(x2, in2)
    blockers = outside if resample_blocked else None
    y_in = _hardcore_rows(rng, sub, lam, constraint, size, blockers=blockers, budget=budget)
    in_x = _inside_mask(x, sub)
    counts_x = np.stack([in_x.sum(axis=1), (x.mask & ~in_x).sum(axis=1)], axis=1)
    counts_y = np.stack([y_in.mask.sum(axis=1), outside.mask.sum(axis=1)], axis=1)
    nn_x = _closest_pair(x.points, in_x, constraint)
    nn_y = _closest_pair(y_in.points, y_in.mask, constraint)
    return counts_x, counts_y, nn_x, nn_y


def _joint_count_table(counts_x, counts_y, min_expected=5.0):
    """Two-row contingency table over joint count cells, sparse cells pooled into one."""
    cells = {}
    for row, counts in enumerate((counts_x, counts_y)):
        keys, freq = np.unique(counts, axis=0, return_counts=True)
        for key, f in zip(map(tuple, keys), freq):
            cells.setdefault(key, [0, 0])[row] += int(f)
    keys = sorted(cells)
    table = np.array([cells[k] for k in keys], dtype=float).T
    total = table.sum()
    expected = table.sum(axis=0) * table.sum(axis=1)[:, None] / total
    small = expected.min(axis=0) < min_expected
    if small.any():
        pooled = table[:, small].sum(axis=1, keepdims=True)
        table = np.concatenate([table[:, ~small], pooled], axis=1) if pooled.sum() else table[:, ~small]
        keys = [k for k, s in zip(keys, small) if not s] + (["pooled"] if pooled.sum() else [])
    return table, keys


def verify_spatial_markov(region, sub, lam, n=100_000, seed=None, constraint=None, streams=1,
                          budget=DEFAULT_BUDGET, significance=SIGNIFICANCE, n_tests=1,
                          resample_blocked=True):
    """Compare ``X`` with ``Y``, the sample obtained by resampling ``X`` inside ``sub``.

    ``Y`` is built from an independent copy ``X'``: the points of ``X'``
    outside ``sub`` are kept and the inside is replaced by a fresh hard-core
    sample on the part of ``sub`` they leave free.  The joint counts
    (inside, outside) of ``X`` and ``Y`` go through a chi-square homogeneity
    test, and the closest-pair distance inside ``sub`` through a two-sample KS
    test.  Both use the threshold ``significance / n_tests``.
    ``resample_blocked=False`` ignores the outside points and exists as a
    negative control.
    """
    lam = check_fugacity(lam)
    n = check_positive_int(n)
    seed = rngmod.resolve_seed(seed)
    constraint = default_constraint(region) if constraint is None else constraint
    if region.spherical or sub.spherical or sub.d != region.d:
        raise DomainError("spatial Markov check needs two Euclidean regions of the same dimension")
    if not region.contains(sub.sample(np.random.default_rng(0), 256)).all():
        raise DomainError("sub-region must lie inside the region")
    if not sub.measure < region.measure:
        raise DomainError("the complement of the sub-region must have positive measure")
    parts = rngmod.map_blocks(
        lambda r, size, _: _markov_block(r, size, region, sub, lam, constraint, budget, resample_blocked),
        n, seed, "spatial_markov", streams)
    cx, cy, nx, ny = (np.concatenate(p) for p in zip(*parts))
    table, cells = _joint_count_table(cx, cy)
    threshold = significance / n_tests
    if table.shape[1] >= 2:
        chi2, p_value, dof, _ = stats.chi2_contingency(table, correction=False)
    else:
        chi2, p_value, dof = 0.0, 1.0, 0
    nx, ny = nx[~np.isnan(nx)], ny[~np.isnan(ny)]
    if len(nx) >= 20 and len(ny) >= 20:
        ks = stats.ks_2samp(nx, ny)
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
    else:
        ks_stat, ks_p = 0.0, 1.0
    violations = int(p_value < threshold) + int(ks_p < threshold)
    return VerificationReport(
        "spatial_markov", n, violations, float(min(p_value, ks_p) - threshold),
        {
            "margin_units": "p-value minus threshold",
            "region": region.describe(), "sub_region": sub.describe(), "lambda": lam,
            "p_value": float(p_value), "chi2": float(chi2), "dof": int(dof), "cells": len(cells),
            "ks_statistic": ks_stat, "ks_p_value": ks_p, "threshold": threshold,
            "closest_pair_rows": [int(len(nx)), int(len(ny))],
            "mean_inside": [float(cx[:, 0].mean()), float(cy[:, 0].mean())],
            "mean_outside": [float(cx[:, 1].mean()), float(cy[:, 1].mean())],
        },
        seed,
    )


# ---------------------------------------------------------------------------
# rearrangement and intersection bounds

def _pair_fraction(region, close, n, seed, tag, streams=1):
    """Fraction of independent uniform pairs ``(u, w)`` of ``region`` with ``close(u, w)``, with stderr."""
    hits = rngmod.map_blocks(
        lambda r, size, _: int(close(region.sample(r, size), region.sample(r, size)).sum()),
        n, seed, tag, streams, PAIR_BLOCK)
    p = sum(hits) / n
    return p, math.sqrt(max(p * (1 - p), 0.0) / n)


def _within_distance(radius):
    r2 = radius * radius
    return lambda u, w: ((u - w) ** 2).sum(axis=1) <= r2


def _within_angle(theta):
    c = math.cos(theta)
    return lambda u, w: (u * w).sum(axis=1) >= c


def overlap_functional(region, n=200_000, seed=None, tag="overlap", streams=1):
    """MC estimate of ``f(T) = int_T vol(B_{2 r_d}(u) & T) du`` and its stderr.

    ``f(T) = vol(T)^2 P(|u - w| <= 2 r_d)`` for independent uniform ``u, w``.
    """
    vol = region.measure
    p, se = _pair_fraction(region, _within_distance(2 * geo.unit_volume_radius(region.d)),
                           n, seed, tag, streams)
    return vol * vol * p, vol * vol * se


def symmetric_rearrangement(region):
    """The centred ball with the same volume."""
    d = region.d
    return Ball(region.measure ** (1.0 / d) * geo.unit_volume_radius(d), dim=d)


def random_box_union(d, rng, max_boxes=4, extent=4.0, side_range=(0.2, 1.6), max_tries=1000):
    """Union of 1 to ``max_boxes`` disjoint random boxes inside ``[0, extent]^d``."""
    d = check_dim(d)
    count = int(rng.integers(1, max_boxes + 1))
    boxes = []
    for _ in range(max_tries):
        if len(boxes) == count:
            break
        sides = rng.uniform(*side_range, size=d)
        lower = rng.uniform(0.0, 1.0, size=d) * np.maximum(extent - sides, 0.0)
        box = Box(tuple(sides), tuple(lower))
        if not any(box.overlaps(b) for b in boxes):
            boxes.append(box)
    return BoxUnion(tuple(boxes))


def scale_box_union(union, factor):
    return BoxUnion(tuple(Box(tuple(np.asarray(b.sides) * factor), tuple(np.asarray(b.lower) * factor))
                          for b in union.boxes))


def verify_rearrangement_euclid(region, n=200_000, seed=None, streams=1, trial=0):
    """Check ``f(T) <= f(T*) + 4 sigma`` for one region ``T``."""
    n = check_positive_int(n)
    seed = rngmod.resolve_seed(seed)
    if region.spherical:
        raise DomainError("rearrangement check is for Euclidean regions")
    star = symmetric_rearrangement(region)
    f_t, se_t = overlap_functional(region, n, seed, f"rearrangement:{trial}:T", streams)
    f_s, se_s = overlap_functional(star, n, seed, f"rearrangement:{trial}:star", streams)
    z = _z_margin(f_s, f_t, math.hypot(se_t, se_s))
    return VerificationReport(
        "rearrangement_euclid", 1, int(z < -SIGMAS), z,
        {"margin_units": "standard errors", "region": region.describe(), "volume": region.measure,
         "f_T": f_t, "f_T_stderr": se_t, "f_T_star": f_s, "f_T_star_stderr": se_s},
        seed,
    )


def verify_rearrangement_suite(d_values=(2, 3), trials=50, n=200_000, seed=None, streams=1):
    """Rearrangement check on ``trials`` random box unions, dimensions drawn in turn from ``d_values``."""
    seed = rngmod.resolve_seed(seed)
    reports = []
    for i in range(check_positive_int(trials, "trials")):
        d = d_values[i % len(d_values)]
        union = random_box_union(d, rngmod.stream(seed, rngmod.tag_of("box_union"), i))
        reports.append(verify_rearrangement_euclid(union, n, seed, streams, trial=i))
    return VerificationReport.merge("rearrangement_euclid", reports, seed)


def euclid_intersection_bound(t, d):
    """``2 * 2^d * (1 - t^(-2/d))^(d/2)``."""
    return 2.0 * 2.0 ** d * (1.0 - t ** (-2.0 / d)) ** (d / 2.0)


def verify_intersection_bound_euclid(t, d, n=200_000, seed=None, trials=5, streams=1):
    """Check ``E_u vol(B_{2 r_d}(u) & T) <= 2 2^d (1 - t^(-2/d))^(d/2)`` for regions of volume ``t``.

    ``T`` runs over the ball of volume ``t`` and ``trials`` random box unions
    rescaled to volume ``t``.
    """
    d = check_dim(d)
    t = float(t)
    if not (2.0 ** (d / 2) * (1 - 1e-12) <= t <= 2.0 ** d * (1 + 1e-12)):
        raise DomainError(f"t must lie in [2^(d/2), 2^d] = [{2 ** (d / 2)}, {2 ** d}], got {t}")
    seed = rngmod.resolve_seed(seed)
    bound = euclid_intersection_bound(t, d)
    shapes = [Ball(t ** (1.0 / d) * geo.unit_volume_radius(d), dim=d)]
    for i in range(trials):
        union = random_box_union(d, rngmod.stream(seed, rngmod.tag_of("intersection_union"), i))
        shapes.append(scale_box_union(union, (t / union.measure) ** (1.0 / d)))
    reports = []
    for i, shape in enumerate(shapes):
        # E_u vol(B(u) & T) = f(T) / vol(T)
        f, se = overlap_functional(shape, n, seed, f"intersection:{t}:{d}:{i}", streams)
        mean, mean_se = f / t, se / t
        z = _z_margin(bound, mean, mean_se)
        reports.append(VerificationReport(
            "intersection_bound_euclid", 1, int(z < -SIGMAS), z,
            {"margin_units": "standard errors", "t": t, "d": d, "bound": bound,
             "shape": shape.describe()["kind"], "mean_intersection": mean, "stderr": mean_se},
            seed))
    return VerificationReport.merge("intersection_bound_euclid", reports, seed, t=t, d=d, bound=bound)


def _pole(d):
    e = np.zeros(d)
    e[0] = 1.0
    return e


def verify_cap_intersection_bound(alpha, theta, d, n=200_000, seed=None, streams=1):
    """Check ``E_u s(C_theta(u) & T) <= 2 s_d(sigma(alpha, theta))`` for ``T`` a cap of radius ``alpha``.

    The left side is ``s(T) P(angle(u, w) <= theta)`` for independent uniform
    ``u, w`` in ``T``.
    """
    theta = check_open_angle(theta)
    d = check_dim(d, spherical=True)
    lo = geo.theta_prime(theta)
    if not (lo - 1e-12 <= alpha <= theta + 1e-12):
        raise DomainError(f"alpha must lie in [theta', theta] = [{lo}, {theta}], got {alpha}")
    alpha = min(max(float(alpha), lo), theta)
    seed = rngmod.resolve_seed(seed)
    cap = Cap(tuple(_pole(d)), alpha)
    p, se = _pair_fraction(cap, _within_angle(theta), n, seed, f"cap_intersection:{alpha}:{theta}:{d}",
                           streams)
    s_t = cap.measure
    bound = 2.0 * geo.cap_measure(d, geo.sigma(alpha, theta))
    z = _z_margin(bound, s_t * p, s_t * se)
    return VerificationReport(
        "cap_intersection_bound", 1, int(z < -SIGMAS), z,
        {"margin_units": "standard errors", "alpha": alpha, "theta": theta, "d": d,
         "mean_intersection": s_t * p, "stderr": s_t * se, "bound": bound, "cap_measure": s_t},
        seed,
    )


def cap_intersection_grid(d_values=(2, 3, 4, 5, 6), thetas=None, n_alpha=4):
    thetas = (math.pi / 6, math.pi / 4, math.pi / 3, 5 * math.pi / 12) if thetas is None else thetas
    grid = []
    for d in d_values:
        for theta in thetas:
            for a in np.linspace(geo.theta_prime(theta), theta, n_alpha):
                grid.append((float(a), float(theta), int(d)))
    return grid


def verify_cap_intersection_suite(grid=None, n=200_000, seed=None, streams=1):
    seed = rngmod.resolve_seed(seed)
    grid = cap_intersection_grid() if grid is None else grid
    reports = [verify_cap_intersection_bound(a, th, d, n, seed, streams) for a, th, d in grid]
    return VerificationReport.merge("cap_intersection_bound", reports, seed)


# ---------------------------------------------------------------------------
# containment

def _ball_rejection(rng, center, radius, keep, n, max_rounds=10_000):
    d = len(center)
    ball = Ball(radius, tuple(center))
    out, have = [], 0
    for _ in range(max_rounds):
        pts = ball.sample(rng, max(2 * (n - have), 1024))
        pts = pts[keep(pts)]
        out.append(pts)
        have += len(pts)
        if have >= n:
            return np.concatenate(out)[:n]
    raise DomainError(f"rejection sampling found only {have} of {n} points in {d} dimensions")


def verify_lens_containment(x, d, n=100_000, seed=None):
    """Sample ``B_{2 r_d}(u) & B_{|u|}(0)`` with ``|u| = x r_d`` and count points outside the containing ball."""
    d = check_dim(d)
    seed = rngmod.resolve_seed(seed)
    rd = geo.unit_volume_radius(d)
    u = _pole(d) * x * rd
    scale, radius = geo.euclidean_lens_containment(x, d)
    rng = rngmod.stream(seed, rngmod.tag_of("lens"), int(round(x * 1e6)), d)
    pts = _ball_rejection(rng, u, 2 * rd, lambda p: np.linalg.norm(p, axis=1) <= x * rd, n)
    dist = np.linalg.norm(pts - scale * u, axis=1)
    excess = dist - radius
    outside = int((excess > 1e-12 * radius).sum())
    return VerificationReport(
        "lens_containment", n, outside, float(-excess.max()),
        {"margin_units": "distance", "x": float(x), "d": d, "radius": radius,
         "max_distance": float(dist.max())},
        seed,
    )


def minimax_center(points, tol=CENTER_TOL, max_steps=CENTER_MAX_STEPS):
    """Centre of the smallest cap containing unit vectors ``points`` (all within an open hemisphere).

    Maximising ``min_i <c, p_i>`` over unit ``c`` is the same as finding the
    minimum-norm point ``y`` of the convex hull of the points; ``c = y/|y|``.
    Pairwise Frank-Wolfe steps move weight from the closest active point to
    the currently farthest point.  The angular radius is bracketed by
    ``arccos |y| <= R <= max_i angle(c, p_i)``.  Iteration stops when the
    bracket or a (non-drop) centre move is below ``tol``, or after
    ``max_steps`` steps.

    Returns ``(center, radius, lower_bound, steps, reason)``.
    """
    P = np.asarray(points, dtype=float)
    g0 = P @ P.mean(axis=0)
    start = int(np.argmax(g0))
    weights = {start: 1.0}
    y = P[start].copy()
    c = y / np.linalg.norm(y)
    reason = "max_steps"
    steps = 0
    for steps in range(1, max_steps + 1):
        g = P @ y
        s = int(np.argmin(g))
        norm_y = math.sqrt(float(y @ y))
        upper = math.acos(min(1.0, max(-1.0, g[s] / norm_y)))
        lower = math.acos(min(1.0, norm_y))
        if upper - lower < tol:
            reason = "bracket"
            break
        active = np.fromiter(weights, dtype=np.int64)
        a = int(active[np.argmax(g[active])])
        if a == s:
            reason = "bracket"
            break
        diff = P[s] - P[a]
        dd = float(diff @ diff)
        gamma = (g[a] - g[s]) / dd
        drop = gamma >= weights[a]
        gamma = min(gamma, weights[a])
        y = y + gamma * diff
        weights[s] = weights.get(s, 0.0) + gamma
        if drop:
            del weights[a]
        else:
            weights[a] -= gamma
        c_new = y / np.linalg.norm(y)
        move = float(geo.angle_between(c, c_new))
        c = c_new
        if move < tol and not drop:
            reason = "stalled"
            break
    radius = float(geo.angle_between(P, c).max())
    lower = math.acos(min(1.0, float(np.linalg.norm(y))))
    return c, radius, lower, steps, reason


def _lens_on_sphere(rng, tau, theta, d, n):
    """Uniform points of ``C_tau(x) & C_theta(u)`` with ``x = e_1`` and ``u`` at angle ``tau`` from it."""
    x = _pole(d)
    u = math.cos(tau) * x
    u[1] = math.sin(tau)
    cos_t = math.cos(theta)
    out, have = [], 0
    for _ in range(10_000):
        pts = Cap(tuple(x), tau).sample(rng, max(2 * (n - have), 1024))
        pts = pts[pts @ u >= cos_t]
        out.append(pts)
        have += len(pts)
        if have >= n:
            return np.concatenate(out)[:n], x, u
    raise DomainError("empty cap intersection: no sample landed in both caps")


def verify_cap_containment(tau, theta, d, n=20_000, seed=None):
    """Check that ``C_tau(x) & C_theta(u)`` fits in a cap of radius ``sigma(tau, theta)`` (``+1e-6``)."""
    theta = check_open_angle(theta)
    d = check_dim(d, spherical=True)
    lo = geo.theta_prime(theta)
    if not (lo - 1e-12 <= tau <= theta + 1e-12):
        raise DomainError(f"tau must lie in [theta', theta] = [{lo}, {theta}], got {tau}")
    tau = min(max(float(tau), lo), theta)
    seed = rngmod.resolve_seed(seed)
    rng = rngmod.stream(seed, rngmod.tag_of("cap_containment"), int(round(tau * 1e9)),
                        int(round(theta * 1e9)), d)
    pts, x, u = _lens_on_sphere(rng, tau, theta, d, n)
    center, radius, lower, steps, reason = minimax_center(pts)
    bound = geo.sigma(tau, theta)
    margin = bound + CONTAINMENT_TOL - radius
    return VerificationReport(
        "cap_containment", 1, int(margin < 0), float(bound - radius),
        {"margin_units": "radians", "tau": tau, "theta": theta, "d": d, "sigma": bound,
         "radius": radius, "radius_lower_bound": lower, "center_steps": steps,
         "center_stop": reason, "center_off_plane": float(np.linalg.norm(center[2:])),
         "samples": n},
        seed,
    )


def containment_grid(d_values=(3, 4), thetas=None, n_tau=5):
    thetas = (math.pi / 6, math.pi / 4, math.pi / 3, 5 * math.pi / 12) if thetas is None else thetas
    return [(float(t), float(th), int(d)) for d in d_values for th in thetas
            for t in np.linspace(geo.theta_prime(th), th, n_tau)]


def verify_containment_suite(n_lens=100_000, n_cap=20_000, seed=None, lens_x=None, lens_d=(2, 3, 5, 8),
                             grid=None):
    seed = rngmod.resolve_seed(seed)
    lens_x = np.linspace(math.sqrt(2.0), 2.0, 5) if lens_x is None else lens_x
    lens = [verify_lens_containment(x, d, n_lens, seed) for d in lens_d for x in lens_x]
    grid = containment_grid() if grid is None else grid
    caps = [verify_cap_containment(t, th, d, n_cap, seed) for t, th, d in grid]
    return [VerificationReport.merge("lens_containment", lens, seed),
            VerificationReport.merge("cap_containment", caps, seed)]


# ---------------------------------------------------------------------------
# occupancy and p_k

def verify_occupancy_bound(region, lam, k, beta=0.5, n=20_000, seed=None, constraint=None,
                           series=None, streams=1, budget=DEFAULT_BUDGET, min_k=OCCUPANCY_MIN_K,
                           size_estimate=None):
    """Check ``E|X| >= (1 - beta) p_k k - 4 sigma`` for ``k <= lam * t``.

    ``E|X|`` comes from exact samples.  ``p_k`` is read from ``series`` when
    given (exact), otherwise estimated.  ``size_estimate`` reuses an
    ``alpha_direct`` result across ``k``.  The lemma only covers ``k`` above an
    unspecified threshold, so failures with ``k < min_k`` are reported in the
    statistics but not counted as violations.
    """
    lam = check_fugacity(lam)
    k = check_positive_int(k, "k")
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    t = region.measure
    if k > lam * t * (1 + 1e-12):
        raise DomainError(f"need k <= lambda * t = {lam * t}, got k={k}")
    seed = rngmod.resolve_seed(seed)
    constraint = default_constraint(region) if constraint is None else constraint
    est = size_estimate or alpha_direct(region, lam, n, constraint, seed, streams, budget)
    scale = 1.0 if region.spherical else t
    mean, mean_se = est.value * scale, est.stderr * scale
    if series is not None:
        if len(series.p_k) > k:
            p_k, p_se = float(series.p_k[k]), 0.0
        elif series.tail_zero:
            p_k, p_se = 0.0, 0.0
        else:
            raise DomainError(f"series stops before k={k}")
    else:
        pe = estimate_p_k(region, k, constraint, n=max(n, 100_000), seed=seed, streams=streams)
        p_k, p_se = pe.value, pe.stderr
    bound = (1 - beta) * p_k * k
    z = _z_margin(mean, bound, math.hypot(mean_se, (1 - beta) * k * p_se))
    enforced = k >= min_k
    stats_out = {"margin_units": "standard errors", "region": region.describe(), "lambda": lam,
                 "k": k, "beta": beta, "mean_size": mean, "mean_size_stderr": mean_se,
                 "p_k": p_k, "p_k_stderr": p_se, "bound": bound, "enforced": enforced,
                 "below_bound": bool(z < -SIGMAS)}
    if series is not None:
        stats_out["mean_size_exact"] = alpha_series(series, lam) * scale
    return VerificationReport("occupancy_bound", 1, int(enforced and z < -SIGMAS), z, stats_out, seed)


def occupancy_testbeds():
    """``(region, lambda, series, constraint)`` for the circle with a small angle and an interval of length 12."""
    theta = 0.2
    return [
        (Sphere(2), 12.0, circle_series(theta), MinAngle(theta)),
        (Box((12.0,)), 1.0, interval_series(12.0, 1.0), MinDistance(1.0)),
    ]


def verify_occupancy_suite(beta=0.5, n=10_000, seed=None, streams=1, testbeds=None, k_values=None):
    """Occupancy bound for every ``k`` in ``[10, lambda t]`` (or ``k_values``) on each testbed."""
    seed = rngmod.resolve_seed(seed)
    reports = []
    for region, lam, series, constraint in (occupancy_testbeds() if testbeds is None else testbeds):
        top = int(math.floor(lam * region.measure + 1e-12))
        ks = range(OCCUPANCY_MIN_K, top + 1) if k_values is None else [k for k in k_values if k <= top]
        size = alpha_direct(region, lam, n, constraint, seed, streams)
        for k in ks:
            reports.append(verify_occupancy_bound(region, lam, k, beta, n, seed, constraint, series,
                                                  streams, size_estimate=size))
    return VerificationReport.merge("occupancy_bound", reports, seed, beta=beta)


def near_threshold_region(d, theta=None, delta=0.2):
    """Region just above the critical size and its constraint.

    Spherical (``theta`` given): the cap whose radius has ``sin = sin theta' + delta/2``.
    Euclidean: the ball of radius ``(sqrt 2 + delta/3) r_d``.
    """
    if theta is None:
        d = check_dim(d)
        rd = geo.unit_volume_radius(d)
        return Ball((math.sqrt(2.0) + delta / 3) * rd, dim=d), MinDistance(2 * rd)
    theta = check_open_angle(theta)
    d = check_dim(d, spherical=True)
    s = math.sin(geo.theta_prime(theta)) + delta / 2
    if s >= 1.0:
        raise DomainError("delta too large: the cap would pass a hemisphere")
    return Cap(tuple(_pole(d)), math.asin(s)), MinAngle(theta)


def verify_pk_near_one(d, theta=math.pi / 3, c=0.1, n=200_000, seed=None, delta=0.2, k=None,
                       euclidean=False, streams=1):
    """Estimate ``p_k`` on a region just above the critical size, ``k = ceil(c d)`` unless given.

    The claim is asymptotic; a single ``d`` only records ``p_k`` and whether
    it reaches one half.  :func:`verify_pk_trend` checks the trend.
    """
    limit = math.log(math.sqrt(2.0)) if euclidean else math.log(
        math.sin(theta) / (math.sqrt(2.0) * math.sin(theta / 2)))
    if k is None:
        if not 0 < c < limit:
            raise DomainError(f"c must lie in (0, {limit}), got {c}")
        k = max(1, math.ceil(c * d))
    region, constraint = near_threshold_region(d, None if euclidean else theta, delta)
    seed = rngmod.resolve_seed(seed)
    est = estimate_p_k(region, k, constraint, n=n, seed=seed, streams=streams)
    return VerificationReport(
        "pk_near_one", 1, 0, est.value - 0.5,
        {"margin_units": "probability above one half", "d": d, "k": k, "c": c, "delta": delta,
         "euclidean": euclidean, "theta": None if euclidean else theta,
         "region": region.describe(), "p_k": est.value, "p_k_stderr": est.stderr,
         "note": "finite-d proxy for an asymptotic statement"},
        seed,
    )


def verify_pk_trend(d_values=(4, 6, 8, 10), theta=math.pi / 3, c=0.1, n=200_000, seed=None,
                    delta=0.2, k=None, euclidean=False, require_half=True, streams=1):
    """``p_k`` must not drop by more than 4 sigma from one ``d`` to the next.

    With ``require_half`` the largest ``d`` must also reach ``p_k >= 1/2``.
    """
    seed = rngmod.resolve_seed(seed)
    reports = [verify_pk_near_one(d, theta, c, n, seed, delta, k, euclidean, streams) for d in d_values]
    values = [r.statistics["p_k"] for r in reports]
    errors = [r.statistics["p_k_stderr"] for r in reports]
    # (p_next - p_prev) / sigma, negative means a drop
    steps = [_z_margin(b, a, math.hypot(sa, sb))
             for a, b, sa, sb in zip(values, values[1:], errors, errors[1:])]
    drops = sum(s < -SIGMAS for s in steps)
    half = values[-1] >= 0.5
    violations = drops + int(require_half and not half)
    return VerificationReport(
        "pk_near_one", len(reports), violations, min(steps, default=math.inf),
        {"margin_units": "standard errors of consecutive differences", "d_values": list(d_values),
         "k_values": [r.statistics["k"] for r in reports], "p_k": values, "p_k_stderr": errors,
         "largest_d_at_least_half": half, "require_half": require_half, "c": c, "delta": delta,
         "fixed_k": k, "euclidean": euclidean,
         "note": "finite-d trend standing in for an asymptotic statement"},
        seed,
    )


# ---------------------------------------------------------------------------
# suites

def spatial_markov_testbeds():
    return [
        (Box((4.0,)), Box((2.0,)), 1.0),
        (Box((3.0, 3.0)), Box((1.0, 1.0)), 0.5),
    ]


def verify_spatial_markov_suite(n=100_000, seed=None, streams=1, testbeds=None):
    seed = rngmod.resolve_seed(seed)
    testbeds = spatial_markov_testbeds() if testbeds is None else testbeds
    reports = [verify_spatial_markov(S, A, lam, n, seed, streams=streams, n_tests=len(testbeds))
               for S, A, lam in testbeds]
    return VerificationReport.merge("spatial_markov", reports, seed)


SUITES = ("spatial_markov", "rearrangement", "intersection", "containment", "occupancy", "pk_near_one")


def run_suite(name, seed=None, trials=None, n=None, streams=1):
    """Run a named suite and return its reports (one per lemma)."""
    seed = rngmod.resolve_seed(seed)
    kw = {} if n is None else {"n": n}
    if name == "spatial_markov":
        return [verify_spatial_markov_suite(seed=seed, streams=streams, **kw)]
    if name == "rearrangement":
        return [verify_rearrangement_suite(trials=50 if trials is None else trials, seed=seed,
                                           streams=streams, **kw),
                verify_cap_intersection_suite(seed=seed, streams=streams, **kw)]
    if name == "intersection":
        out = []
        for d in (2, 3):
            for t in np.linspace(2.0 ** (d / 2), 2.0 ** d, 4):
                out.append(verify_intersection_bound_euclid(float(t), d, seed=seed, streams=streams,
                                                            trials=3 if trials is None else trials, **kw))
        return [VerificationReport.merge("intersection_bound_euclid", out, seed)]
    if name == "containment":
        return verify_containment_suite(seed=seed, **({"n_lens": n} if n else {}))
    if name == "occupancy":
        return [verify_occupancy_suite(seed=seed, streams=streams, **kw)]
    if name == "pk_near_one":
        return [verify_pk_trend(seed=seed, streams=streams, **kw)]
    if name == "all":
        return [r for s in SUITES for r in run_suite(s, seed, trials, n, streams)]
    raise DomainError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
