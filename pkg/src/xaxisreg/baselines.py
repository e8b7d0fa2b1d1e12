"""Polynomial lasso baseline.

Features ``x, x**2, ..., x**degree`` are standardized (population variance),
the intercept is left unpenalized, and the penalized slopes are found by
cyclic coordinate descent with soft-thresholding on the objective

    ||y_c - Z beta||**2 / (2 n) + lam * ||beta||_1

(``y_c`` centered responses, ``Z`` standardized features).
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import Dataset
from .exceptions import DataError, ValidationError

DEFAULT_LAMBDA_GRID = tuple(np.geomspace(1e-4, 10.0, 20))
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 200_000


@njit(cache=True)
def _soft(v, t):
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


@njit(cache=True)
def _objective(G, c, yy, beta, lam):
    q = 0.0
    for j in range(beta.shape[0]):
        gb = 0.0
        for k in range(beta.shape[0]):
            gb += G[j, k] * beta[k]
        q += beta[j] * (0.5 * gb - c[j]) + lam * abs(beta[j])
    return 0.5 * yy + q


@njit(cache=True)
def _coordinate_descent(G, c, yy, lam, beta, tol, max_iter, track):
    p = beta.shape[0]
    hist = np.empty(max_iter + 1 if track else 1)
    if track:
        hist[0] = _objective(G, c, yy, beta, lam)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        delta = 0.0
        for j in range(p):
            r = c[j]
            for k in range(p):
                if k != j:
                    r -= G[j, k] * beta[k]
            new = _soft(r, lam) / G[j, j]
            d = abs(new - beta[j])
            if d > delta:
                delta = d
            beta[j] = new
        if track:
            hist[it] = _objective(G, c, yy, beta, lam)
        if delta <= tol:
            converged = True
            break
    return beta, it, converged, hist[: it + 1] if track else hist[:0]


@dataclass
class LassoModel:
    degree: int
    lam: float
    coefficients: np.ndarray
    feature_means: np.ndarray
    feature_scales: np.ndarray
    converged: bool
    iterations: int

    @property
    def intercept(self):
        return float(self.coefficients[0])

    def to_dict(self):
        return {
            "degree": self.degree,
            "lambda": self.lam,
            "coefficients": [float(v) for v in self.coefficients],
            "feature_means": [float(v) for v in self.feature_means],
            "feature_scales": [float(v) for v in self.feature_scales],
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        return cls(
            degree=int(d["degree"]),
            lam=float(d["lambda"]),
            coefficients=np.asarray(d["coefficients"], dtype=np.float64),
            feature_means=np.asarray(d["feature_means"], dtype=np.float64),
            feature_scales=np.asarray(d["feature_scales"], dtype=np.float64),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
        )


def poly_features(x, degree):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return np.column_stack([x**p for p in range(1, degree + 1)])


def _prepare(x, y, degree):
    P = poly_features(x, degree)
    means = P.mean(axis=0)
    scales = P.std(axis=0)
    for p, s in enumerate(scales, start=1):
        if not s > 0:
            raise DataError(f"polynomial feature x**{p} has zero variance (constant predictor)")
    Z = (P - means) / scales
    yc = y - y.mean()
    n = y.size
    G = Z.T @ Z / n
    c = Z.T @ yc / n
    yy = float(yc @ yc) / n
    return G, c, yy, means, scales


def _check_args(degree, lam):
    if isinstance(degree, bool) or int(degree) != degree or degree < 1:
        raise ValidationError(f"degree must be a positive integer, got {degree!r}")
    if not lam >= 0:
        raise ValidationError(f"lambda must be >= 0, got {lam!r}")


def _xy(dataset):
    if dataset.dimension != 1:
        raise ValidationError("the polynomial lasso baseline takes one predictor")
    return dataset.X[:, 0], dataset.y


def fit_lasso_arrays(x, y, degree, lam, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, track=False):
    _check_args(degree, lam)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size <= degree:
        warnings.warn(f"{x.size} samples for a degree-{degree} polynomial; the fit is underdetermined", stacklevel=3)
    G, c, yy, means, scales = _prepare(x, y, int(degree))
    beta = np.zeros(int(degree))
    beta, iters, converged, hist = _coordinate_descent(G, c, yy, float(lam), beta, float(tol), int(max_iter), track)
    slopes = beta / scales
    intercept = y.mean() - float(slopes @ means)
    model = LassoModel(int(degree), float(lam), np.concatenate([[intercept], slopes]), means, scales, bool(converged), int(iters))
    model.standardized_coef_ = beta
    if track:
        model.objective_history_ = hist
    return model


def fit_lasso(dataset, degree, lam, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, track=False):
    """Fit a polynomial lasso of ``degree`` with L1 penalty ``lam``.

    Coefficients of the returned model are in the original (unstandardized)
    basis, intercept first. Running out of sweeps leaves
    ``converged=False`` rather than raising. With ``track=True`` the
    objective after every sweep is kept in ``model.objective_history_``.
    """
    x, y = _xy(dataset)
    return fit_lasso_arrays(x, y, degree, lam, tol, max_iter, track)


def predict_lasso(model, x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for c in model.coefficients[::-1]:
        out = out * x + c
    return float(out) if out.ndim == 0 else out


def cv_errors(dataset, degree, lambda_grid, k_folds=5, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Pooled k-fold mean absolute error for every lambda in the grid.

    Sample ``i`` goes to fold ``i mod k_folds``.
    """
    x, y = _xy(dataset)
    if k_folds < 2:
        raise ValidationError(f"k_folds must be >= 2, got {k_folds}")
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValidationError("lambda grid is empty")
    folds = np.arange(x.size) % k_folds
    for f in range(k_folds):
        if not np.any(folds == f):
            raise DataError(f"fold {f} has no samples ({x.size} samples for {k_folds} folds)")
    errors = []
    for lam in grid:
        abs_err = np.empty(x.size)
        for f in range(k_folds):
            test = folds == f
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model = fit_lasso_arrays(x[~test], y[~test], degree, lam, tol, max_iter)
            abs_err[test] = np.abs(predict_lasso(model, x[test]) - y[test])
        errors.append(float(abs_err.mean()))
    return np.array(grid), np.array(errors)


def select_lambda(dataset, degree, lambda_grid=DEFAULT_LAMBDA_GRID, k_folds=5, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Pick the lambda with the lowest CV error; ties go to the larger lambda.

    Returns ``(lambda, cv_error)``.
    """
    grid, errors = cv_errors(dataset, degree, lambda_grid, k_folds, tol, max_iter)
    best = None
    for lam, err in sorted(zip(grid, errors)):
        if best is None or err <= best[1]:
            best = (float(lam), float(err))
    return best


class PolynomialLasso(RegressorMixin, BaseEstimator):
    """Polynomial lasso on a single predictor.

    Parameters
    ----------
    degree : int, default=5
    alpha : float, default=1e-3
        L1 penalty on the standardized slopes.
    tol, max_iter
        Coordinate-descent stopping rule (max coefficient change, sweeps).
    """

    def __init__(self, degree=5, alpha=1e-3, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.degree = degree
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError("PolynomialLasso takes exactly one feature")
        self.model_ = fit_lasso_arrays(X[:, 0], y, self.degree, self.alpha, self.tol, self.max_iter)
        self.coef_ = self.model_.coefficients[1:]
        self.intercept_ = self.model_.intercept
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValueError("PolynomialLasso takes exactly one feature")
        return predict_lasso(self.model_, X[:, 0])


class PolynomialLassoCV(PolynomialLasso):
    """Polynomial lasso with the penalty picked by k-fold CV (MAE)."""

    def __init__(self, degree=5, lambdas=None, k_folds=5, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.degree = degree
        self.lambdas = lambdas
        self.k_folds = k_folds
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError("PolynomialLassoCV takes exactly one feature")
        grid = DEFAULT_LAMBDA_GRID if self.lambdas is None else self.lambdas
        self.alpha_, self.cv_error_ = select_lambda(Dataset(X, y), self.degree, grid, self.k_folds, self.tol, self.max_iter)
        self.model_ = fit_lasso_arrays(X[:, 0], y, self.degree, self.alpha_, self.tol, self.max_iter)
        self.coef_ = self.model_.coefficients[1:]
        self.intercept_ = self.model_.intercept
        self.n_features_in_ = 1
        return self
