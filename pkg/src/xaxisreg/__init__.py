"""Pointwise distance-weighted ("x-axis") regression toolkit."""

from .baselines import (
    LassoModel,
    PolynomialLasso,
    PolynomialLassoCV,
    cv_errors,
    fit_lasso,
    predict_lasso,
    select_lambda,
)
from .bench import BenchmarkReport, mae, percent_advantage, rescore, rmse, run_benchmark, split
from .dataset import Dataset, Normalizer, Sample, SynthSpec, gen_synthetic, inverse_normalize, load_csv, normalize, true_function, write_csv
from .estimator import PredictionCurve, predict_at, predict_grid, predict_loo, predict_points
from .exceptions import (
    DataError,
    DegenerateVarianceError,
    DegenerateWeightsError,
    NonFiniteObjectiveError,
    SingularWeightError,
    TuningError,
    ValidationError,
    XAxisError,
)
from .kernels import KernelSpec, describe, weight
from .regressor import XAxisRegressor
from .solvers import DistanceRegressor, SolveResult, euclid_cost, solve_fixed_point, solve_gradient
from .tuning import TuningResult, iterate_randomness, randomness_index, tune_r, tune_two_param, variance_match_loss

__version__ = "0.1.0"
