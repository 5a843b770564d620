"""Closed-form high-dimensional geometry.

Ball volumes and the unit-volume radius ``r_d``, normalised spherical cap
measures ``s_d(theta)``, and the cap-intersection angles ``q(theta)``,
``theta'`` and ``sigma(tau, theta)``.  Everything here is a pure function of
its arguments.  Quantities that under- or overflow doubles for large ``d``
have a ``log_`` twin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, betaincinv, gammaln

from ._validation import HALF_PI, check_dim, check_open_angle
from .exceptions import DomainError

# below this a double betainc result has lost too many digits to take logs
_LOG_SAFE_FLOOR = 1e-280
_CF_TINY = 1e-300
_CF_EPS = 1e-16
_CF_MAX_ITER = 10_000


def log_unit_ball_volume(d):
    d = check_dim(d)
    return 0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0)


def unit_ball_volume(d):
    """Volume ``pi^(d/2) / Gamma(d/2 + 1)`` of the unit ball in ``R^d``.

    Raises :class:`DomainError` when the value is not representable as a
    double; use :func:`log_unit_ball_volume` there.
    """
    log_v = log_unit_ball_volume(d)
    if log_v < -700.0:
        raise DomainError(f"unit ball volume underflows for d={d}; use log_unit_ball_volume")
    return math.exp(log_v)


def ball_volume(d, radius):
    return math.exp(log_unit_ball_volume(d) + d * math.log(radius))


def unit_volume_radius(d):
    """Radius ``r_d`` of the ball of volume one in ``R^d``."""
    return math.exp(-log_unit_ball_volume(d) / d)


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    dd = 1.0 - qab * x / qap
    if abs(dd) < _CF_TINY:
        dd = _CF_TINY
    dd = 1.0 / dd
    h = dd
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        dd = 1.0 + aa * dd
        if abs(dd) < _CF_TINY:
            dd = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        dd = 1.0 / dd
        h *= dd * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        dd = 1.0 + aa * dd
        if abs(dd) < _CF_TINY:
            dd = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _log_betainc(a, b, x):
    """``log I_x(a, b)``, accurate where ``I_x`` itself underflows."""
    if x <= 0.0:
        return -math.inf
    if x >= 1.0:
        return 0.0
    direct = float(betainc(a, b, x))
    if direct > _LOG_SAFE_FLOOR:
        return math.log(direct)
    # tiny values only occur on the side where the fraction converges directly
    log_front = (a * math.log(x) + b * math.log1p(-x)
                 - (gammaln(a) + gammaln(b) - gammaln(a + b)))
    return log_front + math.log(_betacf(a, b, x)) - math.log(a)


def _cap_fraction(d, theta):
    """Normalised measure of a cap of angular radius ``theta`` in [0, pi]."""
    if theta <= 0.0:
        return 0.0
    if theta >= math.pi:
        return 1.0
    half = 0.5 * float(betainc(0.5 * (d - 1), 0.5, math.sin(theta) ** 2))
    return half if theta <= HALF_PI else 1.0 - half


def _check_cap_angle(theta):
    theta = float(theta)
    if not (0.0 < theta <= HALF_PI):
        raise DomainError(f"cap angle must lie in (0, pi/2], got {theta}")
    return theta


def cap_measure(d, theta):
    """Normalised surface measure ``s_d(theta)`` of a cap on the sphere in ``R^d``.

    Uses ``s_d(theta) = I_{sin^2 theta}((d-1)/2, 1/2) / 2``.
    """
    d = check_dim(d, spherical=True)
    return _cap_fraction(d, _check_cap_angle(theta))


def log_cap_measure(d, theta):
    d = check_dim(d, spherical=True)
    theta = _check_cap_angle(theta)
    return _log_betainc(0.5 * (d - 1), 0.5, math.sin(theta) ** 2) - math.log(2.0)


def log_cap_measure_asymptotic(d, theta):
    d = check_dim(d, spherical=True)
    theta = check_open_angle(theta)
    return ((d - 1) * math.log(math.sin(theta))
            - 0.5 * math.log(2.0 * math.pi * d) - math.log(math.cos(theta)))


def cap_measure_asymptotic(d, theta):
    """Leading-order cap measure ``sin^(d-1) theta / (sqrt(2 pi d) cos theta)``."""
    return math.exp(log_cap_measure_asymptotic(d, theta))


def cap_polar_quantile(d, theta, u):
    """Inverse CDF of the polar angle of a uniform point in a cap.

    The polar angle of a uniform point of ``C_theta(x)`` (measured from ``x``)
    has density proportional to ``sin^(d-2)``; ``u`` holds uniforms in [0, 1].
    """
    u = np.asarray(u, dtype=float)
    # closed forms: uniform angle on the circle, uniform height on S^2
    if d == 2:
        return u * theta
    if d == 3:
        return np.minimum(np.arccos(np.clip(1.0 - u * (1.0 - math.cos(theta)), -1.0, 1.0)), theta)
    a = 0.5 * (d - 1)
    target = u * _cap_fraction(d, theta)
    low = target <= 0.5
    phi = np.empty_like(target)
    phi[low] = np.arcsin(np.sqrt(betaincinv(a, 0.5, np.minimum(2.0 * target[low], 1.0))))
    high = ~low
    if np.any(high):
        phi[high] = math.pi - np.arcsin(
            np.sqrt(betaincinv(a, 0.5, np.clip(2.0 * (1.0 - target[high]), 0.0, 1.0))))
    return np.minimum(phi, theta)


def q_of_theta(theta):
    """Angular radius of the smallest cap containing two radius-``theta`` caps at angle ``theta``."""
    theta = check_open_angle(theta)
    c = math.cos(theta)
    return math.asin((1.0 - c) * math.sqrt(1.0 + 2.0 * c) / math.sin(theta))


def theta_prime(theta):
    """The angle ``theta'`` in (0, pi/2) with ``sin theta' = sqrt(2) sin(theta/2)``."""
    theta = check_open_angle(theta)
    return math.asin(math.sqrt(2.0) * math.sin(0.5 * theta))


def _sigma_radicand(tau, theta):
    c = math.cos(theta)
    return (1.0 - c) * (1.0 + c - 2.0 * math.cos(tau) ** 2)


def sigma(tau, theta):
    """Angular radius of a cap containing ``C_tau(x) & C_theta(u)`` when ``x, u`` are ``tau`` apart.

    Defined for ``tau`` in ``[theta', theta]``; the factored radicand
    ``(1 - cos theta)(1 + cos theta - 2 cos^2 tau)`` is used for accuracy.
    """
    theta = check_open_angle(theta)
    lo = theta_prime(theta)
    tau = float(tau)
    # tolerate rounding at the interval ends
    if not (lo - 1e-12 <= tau <= theta + 1e-12):
        raise DomainError(f"tau must lie in [theta', theta] = [{lo}, {theta}], got {tau}")
    tau = min(max(tau, lo), theta)
    value = math.sqrt(max(_sigma_radicand(tau, theta), 0.0)) / math.sin(tau)
    return math.asin(min(value, 1.0))


def euclidean_lens_containment(x, d):
    """Ball containing ``B_{2 r_d}(u) & B_{|u|}(0)`` for ``|u| = x r_d``, ``x >= sqrt 2``.

    Returns ``(center_scale, radius)``: the ball is centred at
    ``center_scale * u`` and has radius ``2 sqrt(1 - x^-2) r_d``.
    """
    d = check_dim(d)
    x = float(x)
    if x < math.sqrt(2.0) - 1e-15:
        raise DomainError(f"lens containment needs x >= sqrt(2), got {x}")
    return 1.0 - 2.0 / (x * x), 2.0 * math.sqrt(1.0 - 1.0 / (x * x)) * unit_volume_radius(d)


def angle_between(x, y):
    """Angles between rows of ``x`` and ``y`` (broadcasting), robust near 0 and pi."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cross = np.linalg.norm(x - y, axis=-1)
    plus = np.linalg.norm(x + y, axis=-1)
    return 2.0 * np.arctan2(cross, plus)


@dataclass(frozen=True)
class CapGeometry:
    """Cap-intersection angles bundled for a fixed ``theta`` and dimension."""

    theta: float
    d: int
    cos_theta: float
    q_theta: float
    theta_prime: float
    cap_measure: float
    log_cap_measure: float

    @classmethod
    def from_angle(cls, theta, d):
        theta = check_open_angle(theta)
        d = check_dim(d, spherical=True)
        return cls(
            theta=theta,
            d=d,
            cos_theta=math.cos(theta),
            q_theta=q_of_theta(theta),
            theta_prime=theta_prime(theta),
            cap_measure=cap_measure(d, theta),
            log_cap_measure=log_cap_measure(d, theta),
        )

    def sigma(self, tau):
        return sigma(tau, self.theta)
