"""Pointwise weighted-average prediction.

At a query ``x`` the minimizer of ``sum_i w(x - x_i) (z - y_i)**2`` is the
weighted mean ``z = sum_i w_i y_i / sum_i w_i``. Everything here evaluates
that closed form, either on a grid of queries or leave-one-out at the
training points.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._accumulate import compensated_sum, weighted_row_sums
from .dataset import Dataset, format_number
from .exceptions import DegenerateWeightsError, SingularWeightError, ValidationError
from .kernels import KernelSpec, describe, pairwise_sq_distance, weights_from_sq

POLICIES = ("return_mean_of_matches", "error")
DEFAULT_POLICY = "return_mean_of_matches"

# max entries of a query-by-sample weight block held in memory at once
_BLOCK = 1 << 22


def _check_policy(policy):
    if policy not in POLICIES:
        raise ValidationError(f"exact-match policy must be one of {POLICIES}, got {policy!r}")


def weighted_average_rows(S, y, kernel, policy=DEFAULT_POLICY, exclude_diagonal=False, queries=None, row_offset=0):
    """Weighted means for each row of combined squared distances ``S``.

    Parameters
    ----------
    S : ndarray of shape (m, n)
        Combined squared distances from each query to each sample.
    y : ndarray of shape (n,)
    kernel : KernelSpec
    policy : {"return_mean_of_matches", "error"}
        What to do when a singular kernel meets a zero-distance sample.
    exclude_diagonal : bool
        Drop sample ``row_offset + i`` from row ``i`` (leave-one-out).
    queries : ndarray, optional
        Query coordinates, only used for error messages.
    """
    y = np.asarray(y, dtype=np.float64)
    W = weights_from_sq(kernel, S)
    m = S.shape[0]
    rows = np.arange(m)
    if exclude_diagonal:
        W[rows, rows + row_offset] = 0.0

    matches = None
    if kernel.singular:
        # subnormal distances overflow 1/s to inf; they are matches too
        matches = ~np.isfinite(W)
        if exclude_diagonal:
            matches[rows, rows + row_offset] = False
        W[matches] = 0.0

    # near-singular weights (~1e307) are finite but their sums overflow;
    # rescale each row by a power of two so its largest weight is below 1.
    # The factor cancels in num / den and the scaling is exact.
    top = W.max(axis=1)
    ok = (top > 0) & np.isfinite(top)
    if ok.any():
        _, e = np.frexp(top[ok])
        W[ok] = np.ldexp(W[ok], -e[:, None])

    num, den = weighted_row_sums(W, y)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = num / den
    lo, hi = y.min(), y.max()

    if matches is not None:
        hit = np.flatnonzero(matches.any(axis=1))
        for i in hit:
            if policy == "error":
                exc = SingularWeightError(
                    f"query {_query_repr(queries, i)} coincides with a training point under singular kernel {describe(kernel)}"
                )
                exc.index = int(i)
                raise exc
            sel = y[matches[i]]
            z[i] = compensated_sum(sel) / sel.size

    bad = ~(den > 0)
    if matches is not None:
        bad &= ~matches.any(axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        exc = DegenerateWeightsError(_query_repr(queries, i))
        exc.index = i
        raise exc
    # the weighted mean is a convex combination; clip rounding excursions
    return np.clip(z, lo, hi)


def _query_repr(queries, i):
    if queries is None:
        return f"#{i}"
    q = np.asarray(queries[i]).tolist()
    return q[0] if len(q) == 1 else q


def _as_queries(x, b):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, b) if b > 1 or x.size != b else x.reshape(1, b)
    if x.ndim != 2 or x.shape[1] != b:
        raise ValidationError(f"queries must have {b} predictor columns, got shape {np.shape(x)}")
    return x


def predict_points(Xq, X, y, kernel, policy=DEFAULT_POLICY, n_jobs=None):
    """Array-level prediction at rows ``Xq`` from training arrays ``X, y``.

    Blocks of queries are evaluated independently; with ``n_jobs > 1`` they
    run on a thread pool and are reassembled by index, so output does not
    depend on the thread count.
    """
    _check_policy(policy)
    Xq = np.asarray(Xq, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    m, n = Xq.shape[0], X.shape[0]
    if m == 0:
        return np.empty(0)
    step = max(1, _BLOCK // max(n, 1))
    starts = list(range(0, m, step))

    def block(s0):
        q = Xq[s0:s0 + step]
        S = pairwise_sq_distance(q, X, kernel.multidim_mode)
        try:
            return weighted_average_rows(S, y, kernel, policy, queries=q)
        except (SingularWeightError, DegenerateWeightsError) as exc:
            exc.index = getattr(exc, "index", 0) + s0
            raise

    if n_jobs is not None and n_jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s0) for s0 in starts]
    return np.concatenate(parts)


def predict_at(x, dataset, kernel, policy=DEFAULT_POLICY):
    """Predicted response at a single predictor vector ``x``."""
    q = _as_queries(x, dataset.dimension)
    if q.shape[0] != 1:
        raise ValidationError("predict_at takes a single query point")
    return float(predict_points(q, dataset.X, dataset.y, kernel, policy)[0])


@dataclass(frozen=True, eq=False)
class PredictionCurve:
    grid: np.ndarray
    values: np.ndarray
    kernel: KernelSpec
    exactmatch_policy: str = DEFAULT_POLICY

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise ValidationError("grid and values must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("prediction values must be finite")

    def __len__(self):
        return len(self.values)

    @property
    def dimension(self):
        return self.grid.shape[1] if self.grid.ndim == 2 else 1

    def to_csv(self, path):
        """Write columns ``d1..db, z``."""
        b = self.dimension
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"d{a + 1}" for a in range(b)] + ["z"])
            for row, z in zip(np.asarray(self.grid).reshape(-1, b), self.values):
                w.writerow([format_number(v) for v in row] + [format_number(z)])


def predict_grid(grid, dataset, kernel, policy=DEFAULT_POLICY, n_jobs=None):
    """Evaluate :func:`predict_at` over ``grid`` (order preserved)."""
    b = dataset.dimension
    g = np.asarray(grid, dtype=np.float64)
    if g.size == 0:
        g = g.reshape(0, b)
    else:
        g = _as_queries(g, b) if g.ndim != 1 or b != 1 else g.reshape(-1, 1)
    try:
        values = predict_points(g, dataset.X, dataset.y, kernel, policy, n_jobs=n_jobs)
    except SingularWeightError as exc:
        raise SingularWeightError(f"grid index {exc.index}: {exc}") from exc
    except DegenerateWeightsError as exc:
        raise DegenerateWeightsError(exc.query, f"grid index {exc.index}: {exc}") from exc
    return PredictionCurve(g, values, kernel, policy)


def loo_from_sq(S, y, kernel, policy=DEFAULT_POLICY, X=None):
    """Leave-one-out predictions given the full ``(n, n)`` distance matrix."""
    n = S.shape[0]
    step = max(1, _BLOCK // max(n, 1))
    parts = []
    for s0 in range(0, n, step):
        block = np.array(S[s0:s0 + step], dtype=np.float64)
        q = None if X is None else X[s0:s0 + step]
        try:
            parts.append(weighted_average_rows(block, y, kernel, policy, exclude_diagonal=True, queries=q, row_offset=s0))
        except (SingularWeightError, DegenerateWeightsError) as exc:
            exc.index = getattr(exc, "index", 0) + s0
            raise
    return np.concatenate(parts)


def predict_loo(dataset, kernel, policy=DEFAULT_POLICY):
    """Predict each training response with that sample held out."""
    _check_policy(policy)
    if dataset.n < 2:
        raise ValidationError("leave-one-out prediction needs at least 2 samples")
    S = pairwise_sq_distance(dataset.X, dataset.X, kernel.multidim_mode)
    return loo_from_sq(S, dataset.y, kernel, policy, X=dataset.X)


__all__ = [
    "POLICIES",
    "Dataset",
    "PredictionCurve",
    "loo_from_sq",
    "predict_at",
    "predict_grid",
    "predict_loo",
    "predict_points",
    "weighted_average_rows",
]
