"""Kernel parameter selection by variance matching.

All objectives are computed on leave-one-out predictions ``e``: with a
sharp kernel the in-sample prediction at a training point is that point's
own response, which would make any variance comparison trivially exact.

The base ``r`` of the exponential kernel is searched in ``log(ln r)``, which
is (up to a constant) the log of the kernel's length scale
``1 / sqrt(2 ln r)``.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ._accumulate import compensated_sum
from .estimator import DEFAULT_POLICY, loo_from_sq
from .exceptions import DegenerateVarianceError, DegenerateWeightsError, TuningError, ValidationError
from .kernels import EXP_FAMILIES, KernelSpec, pairwise_sq_distance
from .solvers import solve_gradient

DEFAULT_R_BOUNDS = (1.0 + 1e-9, 1e300)
GRID_POINTS = 32
REL_WIDTH = 1e-4
ZERO_TOL = 1e-9
NOISE_SHARE_CAP = 0.95
RATIO_GUARD = 0.1
DESCENT_STEP = 4.0
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class InfiniteLoss(float):
    """``inf`` that carries the reason the loss could not be evaluated."""

    def __new__(cls, reason):
        obj = super().__new__(cls, math.inf)
        obj.reason = reason
        return obj


class RandomnessIndex(NamedTuple):
    value: float
    excluded: int


@dataclass
class TuningResult:
    kernel: KernelSpec
    variance_ratio: float
    randomness_index: Optional[float]
    explained_fraction: float
    rounds: list = field(default_factory=list)
    converged: bool = True
    mode: str = "variance"
    objective: float = 0.0
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "schema_version": 1,
            "mode": self.mode,
            "kernel": self.kernel.to_dict(),
            "variance_ratio": self.variance_ratio,
            "randomness_index": self.randomness_index,
            "explained_fraction": self.explained_fraction,
            "objective": self.objective,
            "converged": self.converged,
            "rounds": [dict(r) for r in self.rounds],
            "config": self.config,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        return cls(
            kernel=KernelSpec.from_dict(d["kernel"]),
            variance_ratio=d["variance_ratio"],
            randomness_index=d["randomness_index"],
            explained_fraction=d["explained_fraction"],
            rounds=[dict(r) for r in d["rounds"]],
            converged=d["converged"],
            mode=d["mode"],
            objective=d["objective"],
            config=d.get("config", {}),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
TUNING_RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "TuningResult",
    "type": "object",
    "required": [
        "schema_version", "mode", "kernel", "variance_ratio", "randomness_index",
        "explained_fraction", "objective", "converged", "rounds", "config",
    ],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "mode": {"enum": ["variance", "iterate", "two-param"]},
        "kernel": {
            "type": "object",
            "required": ["family", "p", "shift", "r", "multidim_mode"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["inverse_power", "inverse_power_shifted", "exp_base", "exp_base_shifted", "uniform"]},
                "p": _NUM,
                "shift": {"type": "number", "minimum": 0},
                "r": _NUM_OR_NULL,
                "multidim_mode": {"enum": ["sum", "product"]},
            },
        },
        "variance_ratio": {"type": "number", "minimum": 0},
        "randomness_index": {"type": ["number", "null"], "minimum": 0},
        "explained_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "objective": _NUM,
        "converged": {"type": "boolean"},
        "rounds": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["round", "r", "explained_fraction", "randomness_index"],
                "properties": {
                    "round": {"type": "integer", "minimum": 0},
                    "r": _NUM,
                    "q": _NUM,
                    "explained_fraction": _NUM,
                    "randomness_index": _NUM_OR_NULL,
                    "noise_share": _NUM,
                    "variance_ratio": _NUM,
                    "next_explained_fraction": _NUM,
                },
            },
        },
        "config": {"type": "object"},
    },
}


def population_variance(v):
    v = np.asarray(v, dtype=np.float64)
    mean = compensated_sum(v) / v.size
    d = v - mean
    return compensated_sum(d * d) / v.size


def randomness_index(e, y, zero_tol=ZERO_TOL):
    """Mean of ``|e_i / y_i - 1|`` over samples with ``|y_i| >= zero_tol``.

    Returns ``RandomnessIndex(value, excluded)``.
    """
    e = np.asarray(e, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if e.shape != y.shape:
        raise ValidationError(f"prediction and response lengths differ ({e.size} vs {y.size})")
    keep = np.abs(y) >= zero_tol
    excluded = int(y.size - keep.sum())
    if not keep.any():
        raise DegenerateVarianceError("responses too close to zero for relative index")
    dev = np.abs(e[keep] / y[keep] - 1.0)
    return RandomnessIndex(compensated_sum(dev) / dev.size, excluded)


class LooEvaluator:
    """Leave-one-out predictions for many kernels over one dataset.

    The combined distance matrix is computed once per ``multidim_mode``.
    """

    def __init__(self, dataset, policy=DEFAULT_POLICY):
        if dataset.n < 2:
            raise ValidationError("leave-one-out needs at least 2 samples")
        self.dataset = dataset
        self.policy = policy
        self._sq = {}
        self.var_y = population_variance(dataset.y)

    def sq(self, mode):
        if mode not in self._sq:
            self._sq[mode] = pairwise_sq_distance(self.dataset.X, self.dataset.X, mode)
        return self._sq[mode]

    def predictions(self, kernel):
        return loo_from_sq(self.sq(kernel.multidim_mode), self.dataset.y, kernel, self.policy, X=self.dataset.X)


def _exp_kernel(family, r, q=0.0, multidim_mode="sum"):
    if family not in EXP_FAMILIES:
        raise ValidationError(f"tuning works on {EXP_FAMILIES}, got {family!r}")
    if family == "exp_base":
        return KernelSpec("exp_base", r=r, multidim_mode=multidim_mode)
    return KernelSpec("exp_base_shifted", r=r, shift=q, multidim_mode=multidim_mode)


def _variance_loss(var_y, e):
    var_e = population_variance(e)
    if not var_e > 0:
        return InfiniteLoss("variance of leave-one-out predictions is 0 (all predictions identical)")
    return (var_y / var_e - 1.0) ** 2


def variance_match_loss(r, dataset, family="exp_base", q=0.0, multidim_mode="sum", policy=DEFAULT_POLICY, evaluator=None):
    """``(Var(y) / Var(e) - 1)**2`` for leave-one-out predictions ``e``.

    Population variances. When every leave-one-out prediction is the same
    the result is an :class:`InfiniteLoss` whose ``reason`` says so.
    """
    if not r > 1:
        raise ValidationError(f"r must exceed 1, got {r}")
    if dataset.n < 3:
        raise ValidationError("variance matching needs at least 3 samples")
    ev = evaluator or LooEvaluator(dataset, policy)
    e = ev.predictions(_exp_kernel(family, r, q, multidim_mode))
    return _variance_loss(ev.var_y, e)


# ---------------------------------------------------------------------------
# one-parameter search over r
# ---------------------------------------------------------------------------


def _to_u(r):
    return math.log(math.log(r))


def _to_r(u, lo=1.0, hi=math.inf):
    # clamp u first so exp(exp(u)) cannot overflow; the log-log round trip
    # can still land an ulp outside the bounds
    u = min(u, math.log(709.0))
    return min(max(math.exp(math.exp(u)), lo), hi)


def _check_r_bounds(r_bounds):
    lo, hi = (float(v) for v in r_bounds)
    if not (1 < lo < hi and math.isfinite(hi)):
        raise ValidationError(f"r bounds must satisfy 1 < low < high < inf, got {r_bounds!r}")
    return lo, hi


def _safe_eval(fn, *args):
    try:
        v = fn(*args)
    except DegenerateWeightsError as exc:
        return InfiniteLoss(str(exc))
    return v if math.isfinite(v) else InfiniteLoss(getattr(v, "reason", "non-finite objective"))


def _golden(f, a, b, fa_hint=None, stop=None):
    """Golden-section minimization of ``f`` on ``[a, b]``.

    Ties move the bracket toward ``a``. ``stop(a, b)`` ends the search.
    Returns ``(x, f(x))`` for the best point evaluated.
    """
    best = fa_hint
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for x, fx in ((c, fc), (d, fd)):
        if best is None or fx < best[1] or (fx == best[1] and x < best[0]):
            best = (x, fx)
    while not stop(a, b):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
            x, fx = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
            x, fx = d, fd
        if fx < best[1] or (fx == best[1] and x < best[0]):
            best = (x, fx)
    return best


def _map(fn, items, n_jobs):
    if n_jobs is not None and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(v) for v in items]


def _summarize(ev, kernel, ef, mode, objective, rounds, converged, config, e=None):
    if e is None:
        e = ev.predictions(kernel)
    ratio = population_variance(e) / ev.var_y
    try:
        idx = randomness_index(e, ev.dataset.y).value
    except DegenerateVarianceError:
        idx = None
    return TuningResult(kernel, ratio, idx, ef, rounds, converged, mode, float(objective), config), e


def tune_r(
    dataset,
    family="exp_base",
    r_bounds=DEFAULT_R_BOUNDS,
    explained_fraction=1.0,
    q=0.0,
    multidim_mode="sum",
    policy=DEFAULT_POLICY,
    grid_points=GRID_POINTS,
    rel_width=REL_WIDTH,
    n_jobs=None,
    evaluator=None,
):
    """Choose ``r`` so that ``Var(e) = explained_fraction * Var(y)``.

    Minimizes ``(Var(e) / (explained_fraction * Var(y)) - 1)**2`` over a
    32-point grid, log-spaced in ``ln r``, then refines around the best grid
    point by golden-section search until the ``r`` bracket has relative
    width ``rel_width``. Ties go to the smaller ``r`` (more smoothing).
    """
    lo, hi = _check_r_bounds(r_bounds)
    ef = float(explained_fraction)
    if not 0 < ef <= 1:
        raise ValidationError(f"explained_fraction must be in (0, 1], got {explained_fraction}")
    if dataset.n < 3:
        raise ValidationError("variance matching needs at least 3 samples")
    ev = evaluator or LooEvaluator(dataset, policy)
    if not ev.var_y > 0:
        raise DegenerateVarianceError("degenerate variance: responses have zero variance; every r gives Var(e) = Var(y) = 0")
    target = ef * ev.var_y

    def loss_u(u):
        def inner():
            e = ev.predictions(_exp_kernel(family, _to_r(u, lo, hi), q, multidim_mode))
            return (population_variance(e) / target - 1.0) ** 2
        return _safe_eval(inner)

    us = np.linspace(_to_u(lo), _to_u(hi), grid_points)
    losses = _map(loss_u, us, n_jobs)
    if all(math.isinf(v) for v in losses):
        raise TuningError("every grid value of r gave degenerate leave-one-out predictions")
    k = min(range(len(us)), key=lambda i: (losses[i], i))
    a, b = us[max(k - 1, 0)], us[min(k + 1, len(us) - 1)]

    def narrow(a, b):
        # relative width of the r bracket: r_b / r_a - 1 = expm1(ln r_b - ln r_a)
        return math.expm1(math.exp(b) - math.exp(a)) <= rel_width

    u_best, f_best = _golden(loss_u, a, b, (us[k], losses[k]), narrow)
    kernel = _exp_kernel(family, _to_r(u_best, lo, hi), q, multidim_mode)
    rounds = [{"round": 0, "r": kernel.r, "explained_fraction": ef}]
    config = {
        "family": family, "r_bounds": [lo, hi], "explained_fraction": ef, "q": q,
        "multidim_mode": multidim_mode, "grid_points": grid_points, "rel_width": rel_width,
    }
    result, _ = _summarize(ev, kernel, ef, "variance", f_best, rounds, True, config)
    rounds[0]["randomness_index"] = result.randomness_index
    rounds[0]["variance_ratio"] = result.variance_ratio
    return result


# ---------------------------------------------------------------------------
# randomness iteration
# ---------------------------------------------------------------------------


def noise_share(e, y, var_y=None, zero_tol=ZERO_TOL, ratio_guard=RATIO_GUARD):
    """Implied multiplicative-noise share of ``Var(y)``, clamped to [0, 0.95].

    With ``rho_i = y_i / e_i`` the share is ``Var(rho) * mean(e**2) / Var(y)``,
    following ``Var(f M) = Var(f) + Var(M) E[f**2]`` with ``e`` standing in
    for ``f``. Ratios are formed only where ``|e_i|`` is at least
    ``ratio_guard`` times the RMS of ``e`` (and at least ``zero_tol``):
    near a sign change of the target ``y_i / e_i`` is dominated by the
    error in ``e_i`` and would swamp the variance.
    """
    e = np.asarray(e, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    var_y = population_variance(y) if var_y is None else var_y
    if not var_y > 0:
        raise DegenerateVarianceError("degenerate variance: responses have zero variance")
    floor = max(zero_tol, ratio_guard * math.sqrt(compensated_sum(e * e) / e.size))
    keep = np.abs(e) >= floor
    if keep.sum() < 2:
        raise DegenerateVarianceError("predictions too close to zero to form response ratios")
    rho = y[keep] / e[keep]
    ek = e[keep]
    raw = population_variance(rho) * (compensated_sum(ek * ek) / ek.size) / var_y
    return min(max(raw, 0.0), NOISE_SHARE_CAP)


def iterate_randomness(
    dataset,
    family="exp_base",
    max_rounds=25,
    alpha=0.5,
    r_bounds=DEFAULT_R_BOUNDS,
    tol=1e-3,
    q=0.0,
    multidim_mode="sum",
    policy=DEFAULT_POLICY,
    ratio_guard=RATIO_GUARD,
    n_jobs=None,
):
    """Alternate between tuning ``r`` and re-estimating the noise share.

    Round ``t`` tunes ``r`` for explained fraction ``EF_t`` (``EF_0 = 1``),
    measures the noise share ``s_t`` of the leave-one-out fit and moves to
    ``EF_{t+1} = (1 - alpha) EF_t + alpha (1 - s_t)``. Stops once
    ``|EF_{t+1} - EF_t| <= tol``. The returned kernel is the one tuned in
    the last round, and ``explained_fraction`` is the ``EF`` it was tuned
    for.
    """
    if max_rounds < 1:
        raise ValidationError(f"max_rounds must be >= 1, got {max_rounds}")
    if not 0 < alpha <= 1:
        raise ValidationError(f"damping alpha must be in (0, 1], got {alpha}")
    ev = LooEvaluator(dataset, policy)
    ef = 1.0
    rounds = []
    converged = False
    res = e = None
    for t in range(max_rounds):
        res = tune_r(dataset, family, r_bounds, ef, q, multidim_mode, policy, n_jobs=n_jobs, evaluator=ev)
        e = ev.predictions(res.kernel)
        s = noise_share(e, dataset.y, ev.var_y, ratio_guard=ratio_guard)
        ef_next = (1.0 - alpha) * ef + alpha * (1.0 - s)
        rounds.append({
            "round": t,
            "r": res.kernel.r,
            "explained_fraction": ef,
            "randomness_index": res.randomness_index,
            "noise_share": s,
            "variance_ratio": res.variance_ratio,
            "next_explained_fraction": ef_next,
        })
        if abs(ef_next - ef) <= tol:
            converged = True
            break
        ef = ef_next
    config = {
        "family": family, "max_rounds": max_rounds, "alpha": alpha, "tol": tol,
        "r_bounds": list(_check_r_bounds(r_bounds)), "q": q, "multidim_mode": multidim_mode,
        "ratio_guard": ratio_guard,
    }
    result, _ = _summarize(ev, res.kernel, res.explained_fraction, "iterate", res.objective, rounds, converged, config, e)
    return result


# ---------------------------------------------------------------------------
# two-parameter weighted objective
# ---------------------------------------------------------------------------


def two_param_objective(ev, r, q, lambda_var, lambda_fit, multidim_mode="sum"):
    """``lambda_var * variance loss + lambda_fit * SSE / Var(y) / n``."""
    e = ev.predictions(_exp_kernel("exp_base_shifted", r, q, multidim_mode))
    vml = _variance_loss(ev.var_y, e)
    resid = e - ev.dataset.y
    fit = compensated_sum(resid * resid) / ev.var_y / ev.dataset.n
    return lambda_var * vml + lambda_fit * fit, vml, fit


def tune_two_param(
    dataset,
    family="exp_base_shifted",
    r_bounds=DEFAULT_R_BOUNDS,
    q_bounds=(0.0, 10.0),
    lambda_var=0.7,
    lambda_fit=0.3,
    multidim_mode="sum",
    policy=DEFAULT_POLICY,
    starts=4,
    coarse=8,
    max_passes=20,
    n_jobs=None,
):
    """Jointly pick ``(r, q)`` for the shifted exponential kernel.

    The objective weights the variance-match loss above a normalized fit
    error (``lambda_var > lambda_fit``). A ``coarse x coarse`` log grid seeds
    ``starts`` points, preferring its local minima; from each, coordinate-wise finite-difference
    gradient descent runs in ``(log ln r, log(q + eps))`` until a full pass
    stops improving. The best start wins (ties: smaller ``r``, then smaller
    ``q``).
    """
    if family != "exp_base_shifted":
        raise ValidationError("two-parameter tuning uses the exp_base_shifted family")
    if not lambda_var > lambda_fit > 0:
        raise ValidationError(f"need lambda_var > lambda_fit > 0, got {lambda_var}, {lambda_fit}")
    r_lo, r_hi = _check_r_bounds(r_bounds)
    q_lo, q_hi = (float(v) for v in q_bounds)
    if not 0 <= q_lo <= q_hi < math.inf:
        raise ValidationError(f"q bounds must satisfy 0 <= low <= high < inf, got {q_bounds!r}")
    if dataset.n < 3:
        raise ValidationError("variance matching needs at least 3 samples")
    ev = LooEvaluator(dataset, policy)
    if not ev.var_y > 0:
        raise DegenerateVarianceError("degenerate variance: responses have zero variance")

    u_lo, u_hi = _to_u(r_lo), _to_u(r_hi)
    q_eps = 1e-3 * max(1.0, q_hi)
    v_lo, v_hi = math.log(q_lo + q_eps), math.log(q_hi + q_eps)
    fixed_q = q_hi == q_lo

    def point(u, v):
        r = _to_r(u, r_lo, r_hi)
        q = q_lo if fixed_q else min(max(math.exp(v) - q_eps, q_lo), q_hi)
        return r, q

    def J(u, v):
        r, q = point(u, v)
        return _safe_eval(lambda: two_param_objective(ev, r, q, lambda_var, lambda_fit, multidim_mode)[0])

    us = np.linspace(u_lo, u_hi, coarse)
    vs = np.array([v_lo]) if fixed_q else np.linspace(v_lo, v_hi, coarse)
    cells = [(i, j) for i in range(us.size) for j in range(vs.size)]
    vals = _map(lambda c: J(us[c[0]], vs[c[1]]), cells, n_jobs)
    if all(math.isinf(v) for v in vals):
        raise TuningError("every start of the two-parameter search failed to evaluate")
    seeds = _grid_starts(cells, vals, starts)

    def descend(cell):
        u, v = us[cell[0]], vs[cell[1]]
        f = J(u, v)
        for _ in range(max_passes):
            f_start = f
            # the objective is rescaled by its current value so one step size
            # suits every dataset; backtracking trims steps that overshoot
            scale = f if f > 0 else 1.0
            res = solve_gradient(lambda t: _finite(J(t, v)) / scale, u, step=DESCENT_STEP, tol=1e-9, max_iter=100)
            f_new = J(res.z, v)
            if f_new <= f:
                u, f = min(max(res.z, u_lo), u_hi), f_new
            if not fixed_q:
                scale = f if f > 0 else 1.0
                res = solve_gradient(lambda t: _finite(J(u, t)) / scale, v, step=DESCENT_STEP, tol=1e-9, max_iter=100)
                f_new = J(u, res.z)
                if f_new <= f:
                    v, f = min(max(res.z, v_lo), v_hi), f_new
            if f_start - f <= 1e-12 * max(1.0, abs(f_start)):
                break
        return u, v, f

    finals = _map(descend, seeds, n_jobs)
    u, v, f = min(finals, key=lambda t: (t[2], point(t[0], t[1])))
    r, q = point(u, v)
    kernel = _exp_kernel("exp_base_shifted", r, q, multidim_mode)
    e = ev.predictions(kernel)
    objective, vml, fit = two_param_objective(ev, r, q, lambda_var, lambda_fit, multidim_mode)
    rounds = [{"round": 0, "r": r, "q": q, "explained_fraction": 1.0, "randomness_index": None}]
    config = {
        "family": family, "r_bounds": [r_lo, r_hi], "q_bounds": [q_lo, q_hi],
        "lambda_var": lambda_var, "lambda_fit": lambda_fit, "multidim_mode": multidim_mode,
        "starts": starts, "coarse": coarse,
    }
    result, _ = _summarize(ev, kernel, 1.0, "two-param", objective, rounds, True, config, e)
    rounds[0]["randomness_index"] = result.randomness_index
    result.variance_loss = vml
    result.fit_loss = fit
    return result


def _grid_starts(cells, vals, starts, spacing=2):
    """Pick up to ``starts`` grid cells to descend from.

    Local minima of the grid (no lower 8-neighbour) come first, lowest
    first, since each marks a separate valley. Remaining slots go to the
    lowest cells at least ``spacing + 1`` grid steps from every pick.
    """
    table = dict(zip(cells, vals))

    def is_local_min(c):
        i, j = c
        nb = (table.get((i + a, j + b)) for a in (-1, 0, 1) for b in (-1, 0, 1) if a or b)
        return all(v is None or table[c] <= v for v in nb)

    finite = sorted((c for c in cells if math.isfinite(table[c])), key=lambda c: (table[c], c))
    chosen = [c for c in finite if is_local_min(c)][:starts]
    for c in finite:
        if len(chosen) == starts:
            break
        if all(max(abs(c[0] - o[0]), abs(c[1] - o[1])) > spacing for o in chosen):
            chosen.append(c)
    return chosen


def _finite(v):
    # keep gradient descent inside the region where the objective exists
    return v if math.isfinite(v) else 1e300
