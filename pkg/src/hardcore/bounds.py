"""Asymptotic lower and upper bounds on kissing numbers, spherical codes and packing densities.

Every bound is the displayed asymptotic formula with its ``(1 + o(1))``
factor dropped, evaluated in log space.  Values at a particular ``d`` are
illustrative: they are formula values, not bounds proved for that ``d``.
Each formula also has a direct linear-space evaluation so the two can be
checked against each other where doubles can represent the result.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from . import geometry as geo
from ._validation import check_dim, check_open_angle

LOG2 = math.log(2.0)
LOG_TWO_OVER_ROOT3 = math.log(2.0 / math.sqrt(3.0))
# Kabatiansky-Levenshtein exponents, kept as truncated decimals
KL_KISSING_EXPONENT = 0.4041
KL_PACKING_EXPONENT = 0.5990

KISSING_NEW_CONSTANT = math.sqrt(3 * math.pi) / (4 * math.sqrt(2)) * math.log(1.5)
KISSING_JJP_CONSTANT = math.sqrt(3 * math.pi) / (2 * math.sqrt(2)) * math.log(3 / (2 * math.sqrt(2)))
KISSING_CSW_CONSTANT = math.sqrt(3 * math.pi) / (2 * math.sqrt(2))
RANKIN_CONSTANT = math.sqrt(math.pi) / (2 * math.sqrt(2))
PACKING_NEW_CONSTANT = math.log(math.sqrt(2.0))
PACKING_JJP_CONSTANT = LOG_TWO_OVER_ROOT3

_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class BoundRow:
    """One formula value; ``value`` is None when it is not representable as a double."""

    d: int
    bound_name: str
    log_value: float
    theta: float = None
    value: float = None
    kind: str = "lower"

    @classmethod
    def make(cls, d, name, log_value, theta=None, kind="lower"):
        if not math.isfinite(log_value):
            raise ArithmeticError(f"{name} has a non-finite log value at d={d}")
        value = math.exp(log_value) if abs(log_value) < _EXP_LIMIT else None
        return cls(d, name, log_value, theta, value, kind)

    def to_dict(self):
        return asdict(self)


def _code_prefactor_new(theta):
    # positive exactly when sin(theta) > sqrt(2) sin(theta/2), i.e. theta < pi/2
    return math.log(math.sin(theta) / (math.sqrt(2.0) * math.sin(theta / 2)))


def _code_prefactor_jjp(theta):
    return math.log(math.sin(theta) / math.sin(geo.q_of_theta(theta)))


def _log_cap(d, theta, variant):
    if variant == "exact":
        return geo.log_cap_measure(d, theta)
    if variant == "asymptotic":
        return geo.log_cap_measure_asymptotic(d, theta)
    raise ValueError(f"unknown cap measure variant {variant!r}")


def kissing_lower_new(d):
    d = check_dim(d)
    return BoundRow.make(d, "kissing_new", math.log(KISSING_NEW_CONSTANT) + 1.5 * math.log(d)
                         + d * LOG_TWO_OVER_ROOT3)


def kissing_lower_jjp(d):
    d = check_dim(d)
    return BoundRow.make(d, "kissing_jjp", math.log(KISSING_JJP_CONSTANT) + 1.5 * math.log(d)
                         + d * LOG_TWO_OVER_ROOT3)


def kissing_lower_csw(d):
    """Covering bound for kissing arrangements, ``sqrt(3 pi d)/(2 sqrt 2) (2/sqrt 3)^d``."""
    d = check_dim(d)
    return BoundRow.make(d, "kissing_csw", math.log(KISSING_CSW_CONSTANT) + 0.5 * math.log(d)
                         + d * LOG_TWO_OVER_ROOT3)


def sphere_code_lower_new(d, theta, variant="exact"):
    d = check_dim(d, spherical=True)
    theta = check_open_angle(theta)
    name = "sphere_code_new" if variant == "exact" else "sphere_code_new_asymptotic"
    return BoundRow.make(d, name, math.log(_code_prefactor_new(theta)) + math.log(d)
                         - _log_cap(d, theta, variant), theta)


def sphere_code_lower_jjp(d, theta, variant="exact"):
    d = check_dim(d, spherical=True)
    theta = check_open_angle(theta)
    name = "sphere_code_jjp" if variant == "exact" else "sphere_code_jjp_asymptotic"
    return BoundRow.make(d, name, math.log(_code_prefactor_jjp(theta)) + math.log(d)
                         - _log_cap(d, theta, variant), theta)


def sphere_code_lower_covering(d, theta):
    """Every maximal code has at least ``1 / s_d(theta)`` points."""
    d = check_dim(d, spherical=True)
    theta = check_open_angle(theta)
    return BoundRow.make(d, "sphere_code_covering", -geo.log_cap_measure(d, theta), theta)


def packing_density_lower_new(d):
    d = check_dim(d)
    return BoundRow.make(d, "packing_new", math.log(PACKING_NEW_CONSTANT) + math.log(d) - d * LOG2)


def packing_density_lower_jjp(d):
    d = check_dim(d)
    return BoundRow.make(d, "packing_jjp", math.log(PACKING_JJP_CONSTANT) + math.log(d) - d * LOG2)


def comparison_upper_bounds(d, theta=None):
    """Rankin's bound and the two Kabatiansky-Levenshtein exponential bounds."""
    d = check_dim(d)
    return [
        BoundRow.make(d, "rankin", math.log(RANKIN_CONSTANT) + 1.5 * math.log(d) + 0.5 * d * LOG2,
                      theta, "upper"),
        BoundRow.make(d, "kl_kissing", KL_KISSING_EXPONENT * d * LOG2, theta, "upper"),
        BoundRow.make(d, "kl_packing", -KL_PACKING_EXPONENT * d * LOG2, theta, "upper"),
    ]


@dataclass(frozen=True)
class FugacityThresholds:
    """Natural logs of the fugacity thresholds above which each density lower bound applies (slack set to zero)."""

    d: int
    theta: float
    log_kissing_new: float
    log_packing_new: float
    log_sphere_code_jjp: float
    log_packing_jjp: float

    def to_dict(self):
        return asdict(self)


def fugacity_thresholds(d, theta):
    d = check_dim(d, spherical=True)
    theta = check_open_angle(theta)
    return FugacityThresholds(
        d, theta,
        log_kissing_new=-d * math.log(math.sqrt(2.0) * math.sin(theta / 2)),
        log_packing_new=-0.5 * d * LOG2,
        log_sphere_code_jjp=-math.log(d) - geo.log_cap_measure(d, geo.q_of_theta(theta)),
        log_packing_jjp=-0.5 * d * math.log(3.0),
    )


def linear_value(name, d, theta=None):
    """Direct floating-point evaluation of a formula, for cross-checking the log-space path."""
    s = {
        "kissing_new": lambda: KISSING_NEW_CONSTANT * d ** 1.5 * (2 / math.sqrt(3)) ** d,
        "kissing_jjp": lambda: KISSING_JJP_CONSTANT * d ** 1.5 * (2 / math.sqrt(3)) ** d,
        "kissing_csw": lambda: KISSING_CSW_CONSTANT * math.sqrt(d) * (2 / math.sqrt(3)) ** d,
        "sphere_code_new": lambda: _code_prefactor_new(theta) * d / geo.cap_measure(d, theta),
        "sphere_code_new_asymptotic": lambda: _code_prefactor_new(theta) * d / geo.cap_measure_asymptotic(d, theta),
        "sphere_code_jjp": lambda: _code_prefactor_jjp(theta) * d / geo.cap_measure(d, theta),
        "sphere_code_jjp_asymptotic": lambda: _code_prefactor_jjp(theta) * d / geo.cap_measure_asymptotic(d, theta),
        "sphere_code_covering": lambda: 1.0 / geo.cap_measure(d, theta),
        "packing_new": lambda: PACKING_NEW_CONSTANT * d * 2.0 ** -d,
        "packing_jjp": lambda: PACKING_JJP_CONSTANT * d * 2.0 ** -d,
        "rankin": lambda: RANKIN_CONSTANT * d ** 1.5 * 2.0 ** (d / 2),
        "kl_kissing": lambda: 2.0 ** (KL_KISSING_EXPONENT * d),
        "kl_packing": lambda: 2.0 ** (-KL_PACKING_EXPONENT * d),
    }
    try:
        return s[name]()
    except (OverflowError, ZeroDivisionError):
        return None


def bounds_table(d_values, theta):
    """All bounds for every ``d``; spherical-code rows use the angle ``theta``."""
    theta = check_open_angle(theta)
    rows = []
    for d in d_values:
        rows += [kissing_lower_new(d), kissing_lower_jjp(d), kissing_lower_csw(d)]
        if d >= 2:
            rows += [sphere_code_lower_new(d, theta), sphere_code_lower_new(d, theta, "asymptotic"),
                     sphere_code_lower_jjp(d, theta), sphere_code_lower_covering(d, theta)]
        rows += [packing_density_lower_new(d), packing_density_lower_jjp(d)]
        rows += comparison_upper_bounds(d, theta)
    return rows


def crossover(bound_a, bound_b, d_values):
    """Smallest ``d`` from which ``bound_a(d) > bound_b(d)`` for every later ``d`` in ``d_values``.

    Returns None when ``bound_a`` is not eventually above ``bound_b`` on the range.
    """
    d_values = list(d_values)
    first = None
    for d in d_values:
        if bound_a(d).log_value > bound_b(d).log_value:
            if first is None:
                first = d
        else:
            first = None
    return first


def improvement_ratio_kissing():
    """Ratio of the new to the previous kissing constant, ``log(3/2) / log(9/8)``."""
    return KISSING_NEW_CONSTANT / KISSING_JJP_CONSTANT


def improvement_ratio_packing():
    return PACKING_NEW_CONSTANT / PACKING_JJP_CONSTANT


def improvement_ratio_code(theta):
    theta = check_open_angle(theta)
    return _code_prefactor_new(theta) / _code_prefactor_jjp(theta)
