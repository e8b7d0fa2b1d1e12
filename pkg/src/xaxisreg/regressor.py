"""scikit-learn compatible wrapper around the pointwise estimator."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import Dataset
from .estimator import DEFAULT_POLICY, predict_points
from .kernels import EXP_FAMILIES, KernelSpec
from .tuning import DEFAULT_R_BOUNDS, LooEvaluator, iterate_randomness, tune_r, tune_two_param
from .exceptions import ValidationError

TUNING_MODES = (None, "variance", "iterate", "two-param")


class XAxisRegressor(RegressorMixin, BaseEstimator):
    """Distance-weighted pointwise regressor.

    Each prediction is the weighted mean of the training responses with
    weights ``w(x - x_i)`` from the chosen kernel family. With ``tuning``
    set, the exponential base ``r`` (and ``q`` for the shifted family) are
    selected on the training data during :meth:`fit`; the tuned kernel is
    then ``kernel_`` and the audit trail ``tuning_result_``.

    Parameters
    ----------
    kernel : str, default="exp_base"
        One of ``inverse_power``, ``inverse_power_shifted``, ``exp_base``,
        ``exp_base_shifted``, ``uniform``.
    r : float, default=2.0
        Base of the exponential families (ignored by the others).
    p : float, default=2.0
        Power of the inverse-power families.
    shift : float, default=0.0
        Constant added to the weight denominator (``k`` or ``q``).
    multidim_mode : {"sum", "product"}, default="sum"
    exact_match : {"return_mean_of_matches", "error"}
    tuning : {None, "variance", "iterate", "two-param"}, default=None
    explained_fraction : float, default=1.0
        Target ``Var(e) / Var(y)`` for ``tuning="variance"``.
    alpha, max_rounds
        Damping and round cap for ``tuning="iterate"``.
    r_bounds, q_bounds
        Search intervals for the tuned parameters.
    lambda_var, lambda_fit
        Objective weights for ``tuning="two-param"``.
    n_jobs : int, optional
        Threads for grid evaluation; results do not depend on it.
    """

    def __init__(
        self,
        kernel="exp_base",
        r=2.0,
        p=2.0,
        shift=0.0,
        multidim_mode="sum",
        exact_match=DEFAULT_POLICY,
        tuning=None,
        explained_fraction=1.0,
        alpha=0.5,
        max_rounds=25,
        r_bounds=DEFAULT_R_BOUNDS,
        q_bounds=(0.0, 10.0),
        lambda_var=0.7,
        lambda_fit=0.3,
        n_jobs=None,
    ):
        self.kernel = kernel
        self.r = r
        self.p = p
        self.shift = shift
        self.multidim_mode = multidim_mode
        self.exact_match = exact_match
        self.tuning = tuning
        self.explained_fraction = explained_fraction
        self.alpha = alpha
        self.max_rounds = max_rounds
        self.r_bounds = r_bounds
        self.q_bounds = q_bounds
        self.lambda_var = lambda_var
        self.lambda_fit = lambda_fit
        self.n_jobs = n_jobs

    def _base_kernel(self):
        r = self.r if self.kernel in EXP_FAMILIES else None
        return KernelSpec(self.kernel, p=self.p, shift=self.shift, r=r, multidim_mode=self.multidim_mode)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.tuning not in TUNING_MODES:
            raise ValidationError(f"tuning must be one of {TUNING_MODES}, got {self.tuning!r}")
        ds = Dataset(X, y)
        self.tuning_result_ = None
        if self.tuning is None:
            self.kernel_ = self._base_kernel()
        elif self.tuning == "variance":
            self.tuning_result_ = tune_r(
                ds, self.kernel, self.r_bounds, self.explained_fraction, self.shift,
                self.multidim_mode, self.exact_match, n_jobs=self.n_jobs,
            )
        elif self.tuning == "iterate":
            self.tuning_result_ = iterate_randomness(
                ds, self.kernel, self.max_rounds, self.alpha, self.r_bounds, q=self.shift,
                multidim_mode=self.multidim_mode, policy=self.exact_match, n_jobs=self.n_jobs,
            )
        else:
            self.tuning_result_ = tune_two_param(
                ds, self.kernel, self.r_bounds, self.q_bounds, self.lambda_var, self.lambda_fit,
                self.multidim_mode, self.exact_match, n_jobs=self.n_jobs,
            )
        if self.tuning_result_ is not None:
            self.kernel_ = self.tuning_result_.kernel
        self.X_ = X.astype(np.float64)
        self.y_ = y.astype(np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "kernel_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return predict_points(X, self.X_, self.y_, self.kernel_, self.exact_match, n_jobs=self.n_jobs)

    def loo_predict(self):
        """Leave-one-out predictions at the training points."""
        check_is_fitted(self, "kernel_")
        return LooEvaluator(Dataset(self.X_, self.y_), self.exact_match).predictions(self.kernel_)
