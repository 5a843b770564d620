"""Input validation helpers shared by the public functions and estimators."""
from __future__ import annotations

import math
import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import DomainError

HALF_PI = math.pi / 2


def check_dim(d, *, spherical=False):
    if isinstance(d, bool) or not isinstance(d, numbers.Integral):
        raise DomainError(f"dimension must be an integer, got {d!r}")
    lowest = 2 if spherical else 1
    if d < lowest:
        raise DomainError(f"dimension must be >= {lowest}, got {d}")
    return int(d)


def check_open_angle(theta, name="theta"):
    """Angle in the open interval (0, pi/2), the standing range for hard caps."""
    theta = float(theta)
    if not (0.0 < theta < HALF_PI):
        raise DomainError(f"{name} must lie in (0, pi/2), got {theta}")
    return theta


def check_angle(theta, name="theta", upper=math.pi):
    """Angle in ``(0, upper]``; used where the model itself makes sense beyond pi/2."""
    theta = float(theta)
    if not (0.0 < theta <= upper):
        raise DomainError(f"{name} must lie in (0, {upper:g}], got {theta}")
    return theta


def check_fugacity(lam):
    lam = float(lam)
    if not (lam > 0.0 and math.isfinite(lam)):
        raise DomainError(f"fugacity must be positive and finite, got {lam}")
    return lam


def check_positive_int(n, name="n", minimum=1):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)


def check_points(X, d=None, *, unit=False, allow_empty=True):
    """Coerce ``X`` to a float array of shape ``(n, d)``.

    With ``unit=True`` every row must have norm 1 to within 1e-12.
    """
    X = np.asarray(X, dtype=float)
    if X.size == 0 and allow_empty:
        width = d if d is not None else (X.shape[1] if X.ndim == 2 else 0)
        return np.empty((0, width))
    X = check_array(X, ensure_2d=True, dtype=float)
    if d is not None and X.shape[1] != d:
        raise DomainError(f"expected points in dimension {d}, got {X.shape[1]}")
    if unit:
        norms = np.linalg.norm(X, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DomainError("spherical points must have unit norm")
    return X


def unit_vector(v):
    v = np.asarray(v, dtype=float).ravel()
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DomainError("zero vector has no direction")
    return v / norm
