"""scikit-learn style wrappers around the partition-function and density estimators.

``PartitionFunctionEstimator`` fits the canonical coefficients once and then
answers any fugacity: ``predict`` gives the expected density, ``transform``
the count law.  ``DensityEstimator`` runs one of the three density
estimators at a fixed fugacity.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from . import rng as rngmod
from ._validation import check_fugacity
from .ensemble import (
    Estimate, alpha_direct, alpha_series, alpha_series_stderr, alpha_via_T, count_law, log_z_of_lambda,
    zhat_series,
)
from .exceptions import DomainError
from .regions import Region, parse_region
from .sampler import default_constraint

METHODS = ("direct", "series", "via_T")


def _resolve(region, d, theta):
    if isinstance(region, str):
        region = parse_region(region, d)
    if not isinstance(region, Region):
        raise DomainError(f"region must be a Region or a region literal, got {region!r}")
    return region, default_constraint(region, theta)


def _fugacities(X):
    lams = check_array(np.atleast_1d(np.asarray(X, dtype=float)).reshape(-1, 1), dtype=float).ravel()
    for lam in lams:
        check_fugacity(lam)
    return lams


class PartitionFunctionEstimator(BaseEstimator):
    """Estimate ``zhat[0..K]`` by Monte Carlo (or take a given series) and evaluate it at any fugacity.

    ``K`` is ``k_max`` if set, otherwise the Poisson truncation at ``lam_max``;
    predictions above ``lam_max`` raise when the truncation cannot bound
    the tail.
    """

    def __init__(self, region="box:2", d=None, theta=None, lam_max=1.0, k_max=None,
                 n_per_k=100_000, series=None, seed=None, streams=1):
        self.region = region
        self.d = d
        self.theta = theta
        self.lam_max = lam_max
        self.k_max = k_max
        self.n_per_k = n_per_k
        self.series = series
        self.seed = seed
        self.streams = streams

    def fit(self, X=None, y=None):
        if self.series is not None:
            self.series_ = self.series
            self.seed_ = None
            return self
        region, constraint = _resolve(self.region, self.d, self.theta)
        self.seed_ = rngmod.resolve_seed(self.seed)
        self.series_ = zhat_series(region, constraint, self.k_max, self.n_per_k, self.seed_,
                                   lam=check_fugacity(self.lam_max), streams=self.streams)
        return self

    def predict(self, X):
        """Expected density at each fugacity in ``X``."""
        check_is_fitted(self, "series_")
        return np.array([alpha_series(self.series_, lam) for lam in _fugacities(X)])

    def predict_stderr(self, X):
        check_is_fitted(self, "series_")
        return np.array([alpha_series_stderr(self.series_, lam) for lam in _fugacities(X)])

    def transform(self, X):
        """Count probabilities ``P[|X| = k]``, one row per fugacity."""
        check_is_fitted(self, "series_")
        return np.vstack([count_law(self.series_, lam) for lam in _fugacities(X)])

    def fit_transform(self, X, y=None):
        return self.fit().transform(X)

    def log_partition(self, X):
        check_is_fitted(self, "series_")
        return np.array([log_z_of_lambda(self.series_, np.log(lam)) for lam in _fugacities(X)])


class DensityEstimator(BaseEstimator):
    """Expected density at fugacity ``lam`` by one of ``direct``, ``series`` or ``via_T``."""

    def __init__(self, region="box:2", d=None, theta=None, lam=1.0, method="direct", n=100_000,
                 n_inner=24, seed=None, streams=1):
        self.region = region
        self.d = d
        self.theta = theta
        self.lam = lam
        self.method = method
        self.n = n
        self.n_inner = n_inner
        self.seed = seed
        self.streams = streams

    def fit(self, X=None, y=None):
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")
        region, constraint = _resolve(self.region, self.d, self.theta)
        lam = check_fugacity(self.lam)
        self.seed_ = rngmod.resolve_seed(self.seed)
        if self.method == "direct":
            self.estimate_ = alpha_direct(region, lam, self.n, constraint, self.seed_, self.streams)
        elif self.method == "via_T":
            self.estimate_ = alpha_via_T(region, lam, self.n, self.n_inner, constraint, self.seed_,
                                         self.streams)
        else:
            pf = PartitionFunctionEstimator(region, theta=self.theta, lam_max=lam, n_per_k=self.n,
                                            seed=self.seed_, streams=self.streams).fit()
            self.estimate_ = Estimate(float(pf.predict(lam)[0]), float(pf.predict_stderr(lam)[0]),
                                      self.n, self.seed_, self.streams,
                                      {"lambda": lam, "region": region.describe()},
                                      {"zhat": pf.series_.zhat.tolist()})
        self.alpha_ = self.estimate_.value
        self.stderr_ = self.estimate_.stderr
        return self
