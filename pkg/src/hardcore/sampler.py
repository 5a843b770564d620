"""Exact samplers for the hard sphere and hard cap models.

Grand canonical samples are drawn the way the model is defined: a Poisson
number of uniform points, accepted only if the configuration satisfies the
hard-core constraint.  Rejection keeps every sample exact; when the regime is
too dense the sampler stops with :class:`BudgetExceeded` instead of running
forever.

Everything is vectorised over rows: a row is one independent sampling task,
optionally with its own fixed "blocker" points (configuration outside a
sub-region) and its own membership predicate.  Poisson points that fall
outside the allowed set are removed, which is exactly the restriction of the
Poisson process; only violations among the kept points reject a proposal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import rng as rngmod
from ._validation import check_angle, check_dim, check_fugacity, check_open_angle, check_points
from .exceptions import BudgetExceeded, DomainError
from .regions import Cap, Region, Sphere

DEFAULT_BUDGET = 100_000
# bound on floats held by one proposal round (rows x copies x K x K)
_MAX_PAIR_CELLS = 4_000_000
_MAX_COPIES = 256


def _gram(a, b):
    """Inner products ``<a_m, b_n>`` over the last axis, broadcasting leading axes."""
    d = a.shape[-1]
    if d > 8:
        return np.einsum("...md,...nd->...mn", a, b)
    out = a[..., :, None, 0] * b[..., None, :, 0]
    for i in range(1, d):
        out += a[..., :, None, i] * b[..., None, :, i]
    return out


def _sq_dist(a, b):
    d = a.shape[-1]
    if d > 8:
        diff = a[..., :, None, :] - b[..., None, :, :]
        return np.einsum("...i,...i->...", diff, diff)
    out = np.square(a[..., :, None, 0] - b[..., None, :, 0])
    for i in range(1, d):
        out += np.square(a[..., :, None, i] - b[..., None, :, i])
    return out


@dataclass(frozen=True)
class MinDistance:
    """Euclidean hard-core constraint: distinct centres at distance >= ``min_dist``."""

    min_dist: float

    def __post_init__(self):
        if not self.min_dist > 0:
            raise DomainError("min_dist must be positive")

    @classmethod
    def unit_volume(cls, d):
        """The hard sphere model's constraint ``2 r_d`` (balls of volume one)."""
        return cls(2.0 * geo.unit_volume_radius(check_dim(d)))

    def conflicts(self, a, b):
        """Pairwise conflict matrix between ``a (..., m, d)`` and ``b (..., n, d)``."""
        return _sq_dist(a, b) < self.min_dist ** 2

    def separation(self, a, b):
        return np.linalg.norm(a[..., :, None, :] - b[..., None, :, :], axis=-1)

    def describe(self):
        return {"kind": "min_dist", "min_dist": self.min_dist}


@dataclass(frozen=True)
class MinAngle:
    """Spherical code constraint: ``<x, y> <= cos theta`` for distinct points."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", check_angle(self.theta))

    @property
    def cos_theta(self):
        return math.cos(self.theta)

    def conflicts(self, a, b):
        return _gram(a, b) > self.cos_theta

    def separation(self, a, b):
        return geo.angle_between(a[..., :, None, :], b[..., None, :, :])

    def describe(self):
        return {"kind": "min_angle", "theta": self.theta}


def default_constraint(region, theta=None):
    if region.spherical:
        if theta is None:
            raise DomainError("spherical regions need an angle theta")
        return MinAngle(theta)
    return MinDistance.unit_volume(region.d)


def constraint_from_description(desc):
    if desc["kind"] == "min_dist":
        return MinDistance(desc["min_dist"])
    return MinAngle(desc["theta"])


def _violations(points, constraint, tol):
    """Count pairs breaking the constraint by more than ``tol``."""
    if len(points) < 2:
        return 0
    iu = np.triu_indices(len(points), 1)
    if isinstance(constraint, MinAngle):
        dots = (points @ points.T)[iu]
        return int(np.sum(dots > constraint.cos_theta + tol))
    dist = constraint.separation(points, points)[iu]
    return int(np.sum(dist < constraint.min_dist - tol))


@dataclass
class Packing:
    """Finite point set of a region whose points are pairwise at least ``min_dist`` apart."""

    points: np.ndarray
    region: Region
    min_dist: float
    seed: int = None

    def __post_init__(self):
        self.points = check_points(self.points, self.region.d)

    def __len__(self):
        return len(self.points)

    def is_valid(self, tol=1e-12):
        inside = self.region.contains(self.points).all() if len(self.points) else True
        return bool(inside) and _violations(self.points, MinDistance(self.min_dist), tol) == 0


@dataclass
class SphericalCode:
    """Unit vectors with pairwise inner products at most ``cos theta``."""

    points: np.ndarray
    theta: float
    d: int
    seed: int = None
    region: Region = field(default=None, repr=False)

    def __post_init__(self):
        self.points = check_points(self.points, self.d)
        if self.region is None:
            self.region = Sphere(self.d)

    def __len__(self):
        return len(self.points)

    def is_valid(self, tol=1e-12):
        if len(self.points) == 0:
            return True
        unit = np.all(np.abs(np.linalg.norm(self.points, axis=1) - 1.0) <= tol)
        inside = self.region.contains(self.points).all()
        return bool(unit and inside) and _violations(self.points, MinAngle(self.theta), tol) == 0


class PointBatch:
    """Many configurations stored padded: ``points (n, K, d)`` with a validity ``mask (n, K)``."""

    def __init__(self, points, mask):
        self.points = points
        self.mask = mask

    @classmethod
    def empty(cls, n, d):
        return cls(np.zeros((n, 0, d)), np.zeros((n, 0), dtype=bool))

    @classmethod
    def concatenate(cls, batches):
        width = max(b.points.shape[1] for b in batches)
        d = batches[0].points.shape[2]
        pts = [np.pad(b.points, ((0, 0), (0, width - b.points.shape[1]), (0, 0))) for b in batches]
        masks = [np.pad(b.mask, ((0, 0), (0, width - b.mask.shape[1]))) for b in batches]
        return cls(np.concatenate(pts).reshape(sum(len(b) for b in batches), width, d), np.concatenate(masks))

    @property
    def counts(self):
        return self.mask.sum(axis=1)

    def __len__(self):
        return len(self.mask)

    def __getitem__(self, i):
        return self.points[i][self.mask[i]]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


def _compact(points, mask):
    """Move masked points to the front of each row and trim the padding."""
    order = np.argsort(~mask, axis=-1, kind="stable")
    mask = np.take_along_axis(mask, order, axis=-1)
    points = np.take_along_axis(points, order[..., None], axis=-2)
    width = int(mask.sum(axis=-1).max()) if mask.size else 0
    return points[..., :width, :], mask[..., :width]


def _pairwise_ok(points, mask, constraint):
    conf = constraint.conflicts(points, points)
    k = points.shape[-2]
    conf &= np.triu(np.ones((k, k), dtype=bool), 1)
    conf &= mask[..., :, None] & mask[..., None, :]
    return ~conf.any(axis=(-1, -2))


def _hardcore_rows(rng, base, lam, constraint, n_rows, *, blockers=None, member=None,
                   budget=DEFAULT_BUDGET, fixed_count=None):
    """One exact hard-core sample per row.

    ``base`` is the proposal region; the Poisson intensity is ``lam`` with
    respect to ``base.measure``.  ``blockers`` is a :class:`PointBatch` with
    one (possibly empty) configuration per row: proposed points conflicting
    with a row's blockers are removed.  ``member(points, rows)`` may remove
    further points.  With ``fixed_count=k`` the proposal is ``k`` uniform
    points and no point may be removed, which gives the canonical ensemble.
    """
    d = base.d
    mean = lam * base.measure if fixed_count is None else None
    out_pts = [None] * n_rows
    pending = np.arange(n_rows)
    attempts = np.zeros(n_rows, dtype=np.int64)
    proposals = 0
    accepted = 0
    while len(pending):
        acc_rate = (accepted + 1) / (proposals + 2)
        copies = int(min(_MAX_COPIES, max(1, math.ceil(1.5 / acc_rate)), budget - attempts[pending].max()))
        copies = max(copies, 1)
        if fixed_count is None:
            counts = rng.poisson(mean, size=(len(pending), copies))
        else:
            counts = np.full((len(pending), copies), fixed_count)
        width = int(counts.max()) if counts.size else 0
        # keep one row's pair matrix within the cell cap
        fit = max(1, _MAX_PAIR_CELLS // max(width, 1) ** 2)
        if copies > fit:
            copies = fit
            counts = counts[:, :copies]
            width = int(counts.max())
        per_row = copies * max(width, 1) ** 2
        chunk = max(1, _MAX_PAIR_CELLS // per_row)
        done_rows = []
        for start in range(0, len(pending), chunk):
            rows = pending[start:start + chunk]
            c = counts[start:start + chunk]
            m = len(rows)
            pts = base.sample(rng, m * copies * width).reshape(m, copies, width, d)
            mask = np.arange(width) < c[..., None]
            before = mask.copy()
            if member is not None:
                mask &= member(pts, rows)
            if blockers is not None and blockers.points.shape[1]:
                bp = blockers.points[rows][:, None]
                bm = blockers.mask[rows][:, None, None, :]
                mask &= ~(constraint.conflicts(pts, bp) & bm).any(axis=-1)
            ok = _pairwise_ok(pts, mask, constraint)
            if fixed_count is not None:
                ok &= (mask == before).all(axis=-1)
            first = np.argmax(ok, axis=1)
            hit = ok[np.arange(m), first]
            used = np.where(hit, first + 1, copies)
            attempts[rows] += used
            proposals += int(used.sum())
            accepted += int(hit.sum())
            for i in np.flatnonzero(hit):
                out_pts[rows[i]] = pts[i, first[i]][mask[i, first[i]]]
            done_rows.append(rows[hit])
        done = np.concatenate(done_rows) if done_rows else np.empty(0, dtype=int)
        pending = np.setdiff1d(pending, done, assume_unique=True)
        if len(pending) and attempts[pending].max() >= budget:
            raise BudgetExceeded("rejection sampler exhausted its budget",
                                 accepted / max(proposals, 1), proposals)
    width = max((len(p) for p in out_pts), default=0)
    points = np.zeros((n_rows, width, d))
    mask = np.zeros((n_rows, width), dtype=bool)
    for i, p in enumerate(out_pts):
        points[i, :len(p)] = p
        mask[i, :len(p)] = True
    return PointBatch(points, mask)


def _check_region_constraint(region, constraint):
    if region.spherical != isinstance(constraint, MinAngle):
        raise DomainError("spherical regions take an angular constraint, Euclidean ones a distance")


def sample_hard_sphere(region, lam, rng, budget=DEFAULT_BUDGET, constraint=None):
    """One exact sample of the hard sphere model on ``region`` at fugacity ``lam``."""
    lam = check_fugacity(lam)
    constraint = constraint or MinDistance.unit_volume(region.d)
    _check_region_constraint(region, constraint)
    batch = _hardcore_rows(rng, region, lam, constraint, 1, budget=budget)
    return Packing(batch[0], region, constraint.min_dist)


def sample_hard_cap(region, theta, lam, rng, budget=DEFAULT_BUDGET):
    """One exact sample of the hard cap model; intensity ``lam`` w.r.t. normalised measure."""
    lam = check_fugacity(lam)
    if not region.spherical:
        raise DomainError("the hard cap model lives on a spherical region")
    constraint = MinAngle(theta)
    batch = _hardcore_rows(rng, region, lam, constraint, 1, budget=budget)
    return SphericalCode(batch[0], constraint.theta, region.d, region=region)


def sample_canonical(region, k, rng, budget=DEFAULT_BUDGET, constraint=None, theta=None):
    """Uniform element of ``P_k(region)`` by rejection from independent uniforms."""
    if k < 0:
        raise DomainError("k must be non-negative")
    constraint = constraint or default_constraint(region, theta)
    _check_region_constraint(region, constraint)
    if k == 0:
        pts = np.empty((0, region.d))
    else:
        pts = _hardcore_rows(rng, region, 1.0, constraint, 1, budget=budget, fixed_count=k)[0]
    if isinstance(constraint, MinAngle):
        return SphericalCode(pts, constraint.theta, region.d, region=region)
    return Packing(pts, region, constraint.min_dist)


def sample_batch(region, lam, n, seed, constraint=None, theta=None, streams=1,
                 budget=DEFAULT_BUDGET, k=None):
    """``n`` independent exact samples as a :class:`PointBatch`.

    Grand canonical at fugacity ``lam`` unless ``k`` is given, in which case
    the canonical ensemble of size ``k`` is sampled.  The result depends on
    ``(seed, n)`` and not on ``streams``.
    """
    constraint = constraint or default_constraint(region, theta)
    _check_region_constraint(region, constraint)
    if k is None:
        lam = check_fugacity(lam)
    elif k == 0:
        return PointBatch.empty(n, region.d)

    intensity = 1.0 if k is not None else lam

    def block(rng, size, _):
        return _hardcore_rows(rng, region, intensity, constraint, size, budget=budget, fixed_count=k)

    tag = "sample" if k is None else f"sample:{k}"
    return PointBatch.concatenate(rngmod.map_blocks(block, n, seed, tag, streams))


class UncoveredSet:
    """Externally uncovered neighbourhood ``T(X, v)``.

    Points of the region lying in the open neighbourhood of ``v`` (open ball
    of radius ``min_dist`` or open cap of radius ``theta``) that do not
    conflict with any point of ``X`` outside that neighbourhood.  Membership
    is exact; the measure is estimated by hit-or-miss inside the closed
    neighbourhood, whose measure is known.
    """

    def __init__(self, region, X, v, constraint):
        _check_region_constraint(region, constraint)
        self.region = region
        self.constraint = constraint
        self.v = np.asarray(v, dtype=float)
        X = check_points(X, region.d)
        near = constraint.conflicts(X, self.v[None])[:, 0] if len(X) else np.zeros(0, dtype=bool)
        self.external = X[~near]
        if isinstance(constraint, MinAngle):
            self.neighbourhood = Cap(tuple(self.v), constraint.theta)
        else:
            from .regions import Ball
            self.neighbourhood = Ball(constraint.min_dist, center=tuple(self.v))

    @property
    def d(self):
        return self.region.d

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.region.contains(pts) & self.constraint.conflicts(pts, self.v[None])[:, 0]
        if len(self.external):
            inside &= ~self.constraint.conflicts(pts, self.external).any(axis=1)
        return inside if np.ndim(points) > 1 else bool(inside[0])

    def measure_estimate(self, rng, n):
        """Hit-or-miss estimate of the measure of T: ``(value, stderr)``."""
        hits = self.contains(self.neighbourhood.sample(rng, n))
        frac = hits.mean()
        scale = self.neighbourhood.measure
        return scale * frac, scale * math.sqrt(frac * (1 - frac) / n)

    def sample(self, rng, n, max_rounds=1000):
        """``n`` uniform points of T by rejection from the closed neighbourhood."""
        got = []
        total = 0
        for _ in range(max_rounds):
            pts = self.neighbourhood.sample(rng, max(2 * n, 64))
            pts = pts[self.contains(pts)]
            got.append(pts)
            total += len(pts)
            if total >= n:
                return np.concatenate(got)[:n]
        raise BudgetExceeded("T looks empty", total / (max_rounds * max(2 * n, 64)), max_rounds)


def externally_uncovered(X, v):
    """``T(X, v)`` for a :class:`Packing` ``X`` and a point ``v`` of its region."""
    return UncoveredSet(X.region, X.points, v, MinDistance(X.min_dist))


def externally_uncovered_cap(X, v, theta=None):
    """Spherical ``T(X, v)`` for a :class:`SphericalCode` ``X``."""
    theta = X.theta if theta is None else theta
    return UncoveredSet(X.region, X.points, v, MinAngle(theta))


def stall_window(size):
    """Consecutive rejections after which a greedy arrangement counts as saturated."""
    return max(10_000, 100 * size)


def greedy_saturate(region, constraint, rng, window=stall_window, batch=4096, max_candidates=None):
    """Random sequential addition until ``window(size)`` consecutive candidates are rejected.

    The stopping point is defined on the candidate stream itself, so the
    output does not depend on ``batch``.
    """
    kept = np.empty((0, region.d))
    run = 0
    seen = 0
    while True:
        cand = region.sample(rng, batch)
        bad = constraint.conflicts(cand, kept).any(axis=1) if len(kept) else np.zeros(batch, dtype=bool)
        pos = 0
        fresh = []
        stop = False
        for i in np.flatnonzero(~bad):
            run += i - pos
            if run >= window(len(kept) + len(fresh)):
                stop = True
                break
            if fresh and constraint.conflicts(cand[i][None], np.array(fresh)).any():
                run += 1
            else:
                fresh.append(cand[i])
                run = 0
            pos = i + 1
        if fresh:
            kept = np.vstack([kept, fresh])
        if stop:
            return kept
        run += batch - pos
        seen += batch
        if run >= window(len(kept)):
            return kept
        if max_candidates is not None and seen >= max_candidates:
            return kept


def greedy_maximal_code(d, theta, rng, window=stall_window):
    """Saturated random spherical code of angle ``theta`` on the sphere in ``R^d``."""
    d = check_dim(d, spherical=True)
    constraint = MinAngle(check_open_angle(theta))
    pts = greedy_saturate(Sphere(d), constraint, rng, window)
    return SphericalCode(pts, constraint.theta, d)


def greedy_maximal_packing(region, rng, window=stall_window, constraint=None):
    """Saturated random packing of ``region`` (centres at distance ``>= 2 r_d`` by default)."""
    constraint = constraint or MinDistance.unit_volume(region.d)
    pts = greedy_saturate(region, constraint, rng, window)
    return Packing(pts, region, constraint.min_dist)
