"""Euclidean-distance regression and a scalar finite-difference minimizer.

For a query ``x`` the distance regression picks ``z`` minimizing

    sum_i sqrt(||x - x_i||**2 + (z - y_i)**2)

Setting the derivative to zero gives ``z = sum(y_i / d_i) / sum(1 / d_i)``
with ``d_i`` depending on ``z``, which is iterated to a fixed point
(a Weiszfeld-type update restricted to the vertical line through ``x``).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._accumulate import compensated_sum
from .exceptions import NonFiniteObjectiveError, ValidationError

DIST_FLOOR = 1e-12
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


@dataclass
class SolveResult:
    z: float
    iterations: int
    residual: float
    converged: bool
    trace: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "z": self.z,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }


def _sq_offsets(x, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != X.shape[1]:
        raise ValidationError(f"query has {x.size} coordinates, data has {X.shape[1]}")
    diff = X - x
    return np.einsum("ij,ij->i", diff, diff)


def euclid_cost(x, z, dataset):
    """Sum of Euclidean distances from ``(x, z)`` to every sample."""
    dx2 = _sq_offsets(x, dataset.X)
    dz = z - dataset.y
    return compensated_sum(np.sqrt(dx2 + dz * dz))


def stationarity_residual(x, z, dataset):
    """``(|sum_i (z - y_i) / d_i|, sum_i 1 / d_i)`` at ``z``."""
    dx2 = _sq_offsets(x, dataset.X)
    d = np.maximum(np.sqrt(dx2 + (z - dataset.y) ** 2), DIST_FLOOR)
    return abs(compensated_sum((z - dataset.y) / d)), compensated_sum(1.0 / d)


def _fixed_point(dx2, y, tol, max_iter, keep_trace=False):
    z = compensated_sum(y) / y.size
    trace = [z] if keep_trace else []
    step = math.inf
    for it in range(1, max_iter + 1):
        dz = z - y
        inv = 1.0 / np.maximum(np.sqrt(dx2 + dz * dz), DIST_FLOOR)
        # same update written as a correction, exact once z is a fixed point
        z_new = z - compensated_sum(dz * inv) / compensated_sum(inv)
        step = abs(z_new - z)
        z = z_new
        if keep_trace:
            trace.append(z)
        if step <= tol:
            return SolveResult(z, it, step, True, trace)
    return SolveResult(z, max_iter, step, False, trace)


def solve_fixed_point(x, dataset, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, keep_trace=False):
    """Iterate ``z <- sum(y_i/d_i) / sum(1/d_i)`` from ``z = mean(y)``.

    Distances are floored at ``1e-12`` so a query that lands exactly on a
    sample stays finite. Running out of iterations is not an error: the
    result has ``converged=False`` and the last iterate.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    dx2 = _sq_offsets(x, dataset.X)
    return _fixed_point(dx2, dataset.y, tol, int(max_iter), keep_trace)


def _checked(objective, z):
    f = float(objective(z))
    if not math.isfinite(f):
        raise NonFiniteObjectiveError(f"objective is {f} at iterate z={z!r}")
    return f


def solve_gradient(objective, init, step=0.1, tol=1e-8, max_iter=DEFAULT_MAX_ITER):
    """Minimize a scalar function by finite-difference gradient descent.

    The gradient is a central difference with ``h = 1e-6 * max(1, |z|)``.
    Each iteration starts from the full ``step`` and halves it until the
    objective does not increase; a trial point that evaluates to NaN/inf
    counts as an increase. Stops when ``|gradient| <= tol``.
    """
    if not step > 0:
        raise ValidationError(f"step must be > 0, got {step}")
    if not tol > 0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    z = float(init)
    f = _checked(objective, z)
    g = math.inf
    for it in range(max_iter + 1):
        h = 1e-6 * max(1.0, abs(z))
        g = (_checked(objective, z + h) - _checked(objective, z - h)) / (2 * h)
        if abs(g) <= tol:
            return SolveResult(z, it, abs(g), True)
        if it == max_iter:
            break
        s = step
        while True:
            trial = z - s * g
            if trial == z:
                # step no longer moves z: gradient is finite-difference noise
                return SolveResult(z, it, abs(g), False)
            f_trial = float(objective(trial))
            if math.isfinite(f_trial) and f_trial <= f:
                break
            s *= 0.5
        z, f = trial, f_trial
    return SolveResult(z, max_iter, abs(g), False)


class DistanceRegressor(RegressorMixin, BaseEstimator):
    """Predict each query by the distance-regression fixed point.

    Parameters
    ----------
    tol : float, default=1e-10
        Stop once successive iterates differ by at most ``tol``.
    max_iter : int, default=10000
    """

    def __init__(self, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if not self.tol > 0 or self.max_iter < 1:
            raise ValidationError("tol must be > 0 and max_iter >= 1")
        self.X_ = X.astype(np.float64)
        self.y_ = y.astype(np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "X_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        out = np.empty(X.shape[0])
        self.n_unconverged_ = 0
        for k, x in enumerate(X):
            res = _fixed_point(_sq_offsets(x, self.X_), self.y_, self.tol, self.max_iter)
            out[k] = res.z
            self.n_unconverged_ += not res.converged
        return out
