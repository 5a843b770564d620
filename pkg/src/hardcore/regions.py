"""Simulation domains: boxes, balls, disjoint box unions, the sphere, caps and disjoint cap unions.

Every region knows its dimension, its measure (Lebesgue volume for the
Euclidean kinds, normalised surface measure for the spherical kinds), a
closed membership test and an exact uniform sampler.  Regions are immutable.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from ._validation import check_dim, unit_vector
from .exceptions import DomainError

# slack on closed boundaries, absorbs rounding in samplers
BOUNDARY_TOL = 1e-12


def _as_points(points, d):
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != d:
        raise DomainError(f"point dimension {pts.shape[-1]} does not match region dimension {d}")
    return pts, single


def _unwrap(mask, single):
    return bool(mask[0]) if single else mask


def _unit_directions(rng, size, d):
    g = rng.standard_normal((size, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


class Region:
    """Common interface; subclasses set ``d``, ``measure`` and ``spherical``."""

    spherical = False

    def contains(self, points):
        pts, single = _as_points(points, self.d)
        return _unwrap(self._contains(pts), single)

    def sample(self, rng, size=None):
        """Uniform points: shape ``(d,)`` when ``size`` is None, else ``(size, d)``."""
        n = 1 if size is None else int(size)
        pts = self._sample(rng, n)
        return pts[0] if size is None else pts

    def describe(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Box(Region):
    """Axis-aligned box ``prod [lower_i, lower_i + side_i]``."""

    sides: tuple
    lower: tuple = None

    def __post_init__(self):
        sides = tuple(float(s) for s in np.atleast_1d(self.sides))
        if not sides or any(not (s > 0 and math.isfinite(s)) for s in sides):
            raise DomainError(f"box side lengths must be positive, got {sides}")
        lower = (0.0,) * len(sides) if self.lower is None else tuple(float(x) for x in self.lower)
        if len(lower) != len(sides):
            raise DomainError("box corner and side lengths differ in dimension")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "lower", lower)

    @property
    def d(self):
        return len(self.sides)

    @property
    def measure(self):
        return float(np.prod(self.sides))

    @property
    def upper(self):
        return tuple(lo + s for lo, s in zip(self.lower, self.sides))

    @property
    def centroid(self):
        return np.asarray(self.lower) + 0.5 * np.asarray(self.sides)

    def _contains(self, pts):
        lo = np.asarray(self.lower) - BOUNDARY_TOL
        hi = np.asarray(self.upper) + BOUNDARY_TOL
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def _sample(self, rng, n):
        return np.asarray(self.lower) + rng.random((n, self.d)) * np.asarray(self.sides)

    def overlaps(self, other):
        """True when the interiors intersect."""
        lo = np.maximum(self.lower, other.lower)
        hi = np.minimum(self.upper, other.upper)
        return bool(np.all(lo < hi))

    def describe(self):
        return {"kind": "box", "sides": list(self.sides), "lower": list(self.lower)}


@dataclass(frozen=True)
class Ball(Region):
    """Closed Euclidean ball; ``center`` defaults to the origin of ``R^d``."""

    radius: float
    center: tuple = None
    dim: int = None

    def __post_init__(self):
        radius = float(self.radius)
        if not (radius > 0 and math.isfinite(radius)):
            raise DomainError(f"ball radius must be positive, got {radius}")
        if self.center is None:
            if self.dim is None:
                raise DomainError("a ball needs a center or a dimension")
            center = (0.0,) * check_dim(self.dim)
        else:
            center = tuple(float(x) for x in np.atleast_1d(self.center))
        object.__setattr__(self, "radius", radius)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "dim", len(center))

    @property
    def d(self):
        return self.dim

    @property
    def measure(self):
        return geo.ball_volume(self.d, self.radius)

    @property
    def centroid(self):
        return np.asarray(self.center)

    def _contains(self, pts):
        dist = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return dist <= self.radius * (1 + BOUNDARY_TOL)

    def _sample(self, rng, n):
        dirs = _unit_directions(rng, n, self.d)
        radii = self.radius * rng.random(n) ** (1.0 / self.d)
        return np.asarray(self.center) + dirs * radii[:, None]

    def describe(self):
        return {"kind": "ball", "radius": self.radius, "center": list(self.center)}


@dataclass(frozen=True)
class BoxUnion(Region):
    """Finite union of boxes with pairwise disjoint interiors."""

    boxes: tuple

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if not boxes:
            raise DomainError("a box union needs at least one box")
        if len({b.d for b in boxes}) != 1:
            raise DomainError("all boxes of a union must share a dimension")
        for i, a in enumerate(boxes):
            for b in boxes[i + 1:]:
                if a.overlaps(b):
                    raise DomainError("box union members must have disjoint interiors")
        object.__setattr__(self, "boxes", boxes)

    @property
    def d(self):
        return self.boxes[0].d

    @property
    def measure(self):
        return float(sum(b.measure for b in self.boxes))

    def _contains(self, pts):
        mask = np.zeros(len(pts), dtype=bool)
        for b in self.boxes:
            mask |= b._contains(pts)
        return mask

    def _sample(self, rng, n):
        weights = np.array([b.measure for b in self.boxes])
        which = rng.choice(len(self.boxes), size=n, p=weights / weights.sum())
        out = np.empty((n, self.d))
        for i, b in enumerate(self.boxes):
            sel = which == i
            out[sel] = b._sample(rng, int(sel.sum()))
        return out

    def describe(self):
        return {"kind": "box_union", "boxes": [b.describe() for b in self.boxes]}


@dataclass(frozen=True)
class Sphere(Region):
    """The unit sphere in ``R^d`` with its normalised surface measure."""

    dim: int
    spherical = True

    def __post_init__(self):
        object.__setattr__(self, "dim", check_dim(self.dim, spherical=True))

    @property
    def d(self):
        return self.dim

    @property
    def measure(self):
        return 1.0

    def _contains(self, pts):
        return np.abs(np.linalg.norm(pts, axis=1) - 1.0) <= 1e-9

    def _sample(self, rng, n):
        return _unit_directions(rng, n, self.d)

    def describe(self):
        return {"kind": "sphere", "d": self.d}


def _orthogonal_directions(rng, center, n):
    g = rng.standard_normal((n, len(center)))
    g -= np.outer(g @ center, center)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_cap_points(rng, center, theta, n):
    """Uniform points of the closed cap ``C_theta(center)``, any ``theta`` in (0, pi].

    The polar angle is drawn from its exact marginal by inverse CDF, so the
    cost does not depend on how small the cap is.
    """
    center = np.asarray(center, dtype=float)
    phi = geo.cap_polar_quantile(len(center), theta, rng.random(n))
    w = _orthogonal_directions(rng, center, n)
    pts = np.cos(phi)[:, None] * center + np.sin(phi)[:, None] * w
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


@dataclass(frozen=True)
class Cap(Region):
    """Closed spherical cap ``{y : <center, y> >= cos theta}``."""

    center: tuple
    theta: float
    spherical = True

    def __post_init__(self):
        center = unit_vector(self.center)
        check_dim(len(center), spherical=True)
        theta = float(self.theta)
        if not (0.0 < theta <= math.pi):
            raise DomainError(f"cap radius must lie in (0, pi], got {theta}")
        object.__setattr__(self, "center", tuple(center))
        object.__setattr__(self, "theta", theta)

    @property
    def d(self):
        return len(self.center)

    @property
    def measure(self):
        return geo._cap_fraction(self.d, self.theta)

    def _contains(self, pts):
        return pts @ np.asarray(self.center) >= math.cos(self.theta) - BOUNDARY_TOL

    def _sample(self, rng, n):
        return sample_cap_points(rng, np.asarray(self.center), self.theta, n)

    def describe(self):
        return {"kind": "cap", "center": list(self.center), "theta": self.theta}


@dataclass(frozen=True)
class CapUnion(Region):
    """Finite union of pairwise disjoint caps (center angle above the sum of radii)."""

    caps: tuple
    spherical = True

    def __post_init__(self):
        caps = tuple(self.caps)
        if not caps:
            raise DomainError("a cap union needs at least one cap")
        if len({c.d for c in caps}) != 1:
            raise DomainError("all caps of a union must share a dimension")
        for i, a in enumerate(caps):
            for b in caps[i + 1:]:
                gap = float(geo.angle_between(np.asarray(a.center), np.asarray(b.center)))
                if gap <= a.theta + b.theta:
                    raise DomainError("cap union members must be disjoint")
        object.__setattr__(self, "caps", caps)

    @property
    def d(self):
        return self.caps[0].d

    @property
    def measure(self):
        return float(sum(c.measure for c in self.caps))

    def _contains(self, pts):
        mask = np.zeros(len(pts), dtype=bool)
        for c in self.caps:
            mask |= c._contains(pts)
        return mask

    def _sample(self, rng, n):
        weights = np.array([c.measure for c in self.caps])
        which = rng.choice(len(self.caps), size=n, p=weights / weights.sum())
        out = np.empty((n, self.d))
        for i, c in enumerate(self.caps):
            sel = which == i
            out[sel] = c._sample(rng, int(sel.sum()))
        return out

    def describe(self):
        return {"kind": "cap_union", "caps": [c.describe() for c in self.caps]}


def volume(region):
    """Lebesgue measure of a Euclidean region."""
    if region.spherical:
        raise DomainError("volume() is for Euclidean regions; use measure()")
    return region.measure


def measure(region):
    """Normalised surface measure of a spherical region (volume for Euclidean ones)."""
    return region.measure


def contains(region, p):
    return region.contains(p)


def sample_uniform(region, rng, size=None):
    return region.sample(rng, size)


_LITERAL = re.compile(r"^\s*(box|ball|sphere|cap)\s*:\s*(.+?)\s*$")


def _keyvals(body):
    out = {}
    for part in body.split(","):
        if "=" not in part:
            raise DomainError(f"expected key=value in region literal, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_region(text, d=None):
    """Parse ``box:2x3``, ``ball:r=1.5``, ``sphere:d=4`` or ``cap:d=4,theta=1.0472``.

    ``d`` supplies (or must agree with) the dimension.  A one-number box such
    as ``box:2`` is a cube of that side in dimension ``d`` (default 1).  Caps
    are centred at the first basis vector.
    """
    m = _LITERAL.match(text)
    if not m:
        raise DomainError(f"cannot parse region literal {text!r}")
    kind, body = m.groups()
    try:
        if kind == "box":
            sides = [float(s) for s in body.lower().split("x")]
            if len(sides) == 1 and d is not None:
                sides = sides * check_dim(d)
            region = Box(tuple(sides))
        elif kind == "ball":
            kv = _keyvals(body)
            dim = int(kv.get("d", d if d is not None else 0)) or None
            if dim is None:
                raise DomainError("ball literal needs a dimension (d=... or --d)")
            region = Ball(float(kv["r"]), dim=dim)
        elif kind == "sphere":
            kv = _keyvals(body)
            region = Sphere(int(kv.get("d", d if d is not None else 0)))
        else:
            kv = _keyvals(body)
            dim = int(kv.get("d", d if d is not None else 0))
            center = np.zeros(check_dim(dim, spherical=True))
            center[0] = 1.0
            region = Cap(tuple(center), float(kv["theta"]))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"cannot parse region literal {text!r}: {exc}") from exc
    if d is not None and region.d != d:
        raise DomainError(f"region {text!r} has dimension {region.d}, expected {d}")
    return region


def region_from_description(desc):
    """Inverse of ``Region.describe``."""
    kind = desc["kind"]
    if kind == "box":
        return Box(tuple(desc["sides"]), tuple(desc["lower"]))
    if kind == "ball":
        return Ball(desc["radius"], tuple(desc["center"]))
    if kind == "box_union":
        return BoxUnion(tuple(region_from_description(b) for b in desc["boxes"]))
    if kind == "sphere":
        return Sphere(desc["d"])
    if kind == "cap":
        return Cap(tuple(desc["center"]), desc["theta"])
    if kind == "cap_union":
        return CapUnion(tuple(region_from_description(c) for c in desc["caps"]))
    raise DomainError(f"unknown region kind {kind!r}")
