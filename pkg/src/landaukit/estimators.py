"""scikit-learn style wrappers around the solver and diagnostics.

Each row of an input matrix is one flattened field on a grid of ``dim``
dimensions and half-width ``L``; the per-axis resolution is inferred from the
row length.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .collision import build_symbols
from .dyadic import NormSpec, ProjectorBank, dyadic_table, norm_hmsl_direct, norm_hmsl_dyadic
from .experiments import fit_power_law
from .grid import ScalarField, VelocityGrid
from .integrator import Model, SchemeConfig, run

__all__ = ["LandauFlow", "WeightedSobolevNorm", "DyadicProfile", "PowerLawRateRegressor"]


def _grid_for(width: int, dim: int, L: float) -> VelocityGrid:
    n = round(width ** (1.0 / dim))
    if n**dim != width:
        raise ValueError(f"row length {width} is not a perfect {dim}-th power")
    return VelocityGrid(dim, n, L)


class _FieldTransformer(TransformerMixin, BaseEstimator):
    dim: int
    L: float

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.grid_ = _grid_for(X.shape[1], self.dim, self.L)
        self.n_features_in_ = X.shape[1]
        return self

    def _check(self, X) -> np.ndarray:
        check_is_fitted(self, "grid_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def _fields(self, X):
        for row in X:
            yield ScalarField(self.grid_, row.reshape(self.grid_.shape))


class LandauFlow(_FieldTransformer):
    """Map initial data to the solution at ``t_end``.

    Parameters
    ----------
    model : {"landau", "toy", "semilinear-heat", "pure-heat"}
    t_end : float
    scheme : {"rk4", "euler", "imex-frozen"}
    cfl_safety : float
    dim, L : grid dimension and half-width.
    """

    def __init__(self, model="landau", t_end=0.1, scheme="rk4", cfl_safety=0.4, dim=3, L=8.0):
        self.model = model
        self.t_end = t_end
        self.scheme = scheme
        self.cfl_safety = cfl_safety
        self.dim = dim
        self.L = L

    def fit(self, X, y=None):
        super().fit(X, y)
        sym = build_symbols(self.grid_) if self.model == "landau" else None
        self.model_ = Model(self.model, sym)
        self.config_ = SchemeConfig(scheme=self.scheme, cfl_safety=self.cfl_safety,
                                    t_end=self.t_end, record_every=10**9)
        return self

    def transform(self, X):
        X = self._check(X)
        out = [run(self.model_, f, self.config_).field.values.ravel() for f in self._fields(X)]
        return np.asarray(out)


class WeightedSobolevNorm(_FieldTransformer):
    """One column holding ``||f||_{H^{m,s}_l}`` per row."""

    def __init__(self, m=0.0, s=0.0, l=0.0, method="direct", dim=3, L=8.0):
        self.m = m
        self.s = s
        self.l = l
        self.method = method
        self.dim = dim
        self.L = L

    def transform(self, X):
        X = self._check(X)
        spec = NormSpec(self.m, self.s, self.l)
        if self.method == "direct":
            vals = [norm_hmsl_direct(spec, f) for f in self._fields(X)]
        elif self.method == "dyadic":
            bank = ProjectorBank(self.grid_)
            vals = [norm_hmsl_dyadic(spec, f, bank) for f in self._fields(X)]
        else:
            raise ValueError(f"unknown method {self.method!r}")
        return np.asarray(vals)[:, None]


class DyadicProfile(_FieldTransformer):
    """Flattened table ``||F_j P_k f||^2`` over the resolvable shells, row-major in ``j``."""

    def __init__(self, dim=3, L=8.0):
        self.dim = dim
        self.L = L

    def fit(self, X, y=None):
        super().fit(X, y)
        self.bank_ = ProjectorBank(self.grid_)
        self.shape_ = (len(self.bank_.j_range), len(self.bank_.k_range))
        return self

    def transform(self, X):
        X = self._check(X)
        return np.asarray([dyadic_table(self.bank_, f).ravel() for f in self._fields(X)])


class PowerLawRateRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit ``y = C t^slope`` on log-log axes.

    Attributes
    ----------
    coef_ : ndarray of shape (1,)
        The fitted slope.
    intercept_ : float
        ``log C``.
    slope_se_ : float
        Standard error of the slope.
    """

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = check_array(np.asarray(y, dtype=float).reshape(-1, 1), dtype=np.float64).ravel()
        if X.shape[1] != 1:
            raise ValueError("PowerLawRateRegressor expects a single time column")
        if np.any(X <= 0) or np.any(y <= 0):
            raise ValueError("times and values must be positive")
        slope, icpt, se = fit_power_law(X[:, 0], y)
        self.coef_ = np.array([slope])
        self.intercept_ = icpt
        self.slope_se_ = se
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return np.exp(self.intercept_) * X[:, 0] ** self.coef_[0]
