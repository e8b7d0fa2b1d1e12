"""Acceptance suite: one PASS/FAIL line per criterion, each with its time budget.

Run with ``pytest tests/test_acceptance.py -s`` (or ``-v``; the lines are
written with capture disabled either way).
"""

import time

import numpy as np
import pytest

from xaxisreg.bench import (
    BenchmarkReport,
    percent_advantage,
    rescore,
    run_benchmark,
    sine_suite_config,
    square_suite_config,
)
from xaxisreg.baselines import fit_lasso
from xaxisreg.dataset import Dataset, SynthSpec, gen_synthetic, true_function
from xaxisreg.estimator import predict_at
from xaxisreg.kernels import KernelSpec, weight, weights_from_sq
from xaxisreg.solvers import euclid_cost, solve_fixed_point, solve_gradient
from xaxisreg.tuning import iterate_randomness, population_variance, tune_r

SUITE_SEEDS = (1, 2, 3, 4, 5)

KERNELS = (
    KernelSpec("inverse_power", p=2.0),
    KernelSpec("inverse_power_shifted", p=1.5, shift=0.1),
    KernelSpec("exp_base", r=2.0),
    KernelSpec("exp_base", r=50.0),
    KernelSpec("exp_base_shifted", r=3.0, shift=0.5),
    KernelSpec("uniform"),
)


@pytest.fixture
def verdict(capsys):
    """Print one criterion line, then fail the test if the criterion did."""

    def emit(number, name, ok, detail, elapsed, budget=None):
        within = budget is None or elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        limit = f" (budget {budget:g} s)" if budget is not None else ""
        with capsys.disabled():
            print(f"\nCRITERION {number} {status}: {name}: {detail}; {elapsed:.2f} s{limit}")
        assert ok, detail
        assert within, f"runtime {elapsed:.2f} s over budget {budget} s"

    return emit


def grid_minimizer(x, ds, step=1e-4):
    zs = np.arange(ds.y.min(), ds.y.max() + step, step)
    d = np.sqrt((x - ds.X[:, 0])[None, :] ** 2 + (zs[:, None] - ds.y[None, :]) ** 2)
    return zs[np.argmin(d.sum(axis=1))]


def test_criterion_1_table_arithmetic(verdict):
    t = time.perf_counter()
    rows = [
        (0.16057744, 0.15342135612367921, 4.66433),
        (0.15614923, 0.1474352255852411, 5.91039),
        (0.15644323, 0.1497225507429759, 4.48875),
    ]
    errs = [abs(percent_advantage(b, n) - e) for b, n, e in rows]
    verdict(1, "table arithmetic", max(errs) <= 1e-4, f"max |error| {max(errs):.2e} over 3 rows", time.perf_counter() - t)


def test_criterion_2_closed_form_vs_descent(verdict):
    t = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 21))
        X = rng.uniform(0, 5, (n, 1))
        y = rng.normal(0, 3, n)
        x = rng.uniform(0, 5)
        k = KERNELS[seed % len(KERNELS)]
        w = weights_from_sq(k, (x - X[:, 0]) ** 2)
        z = predict_at([x], Dataset(X, y), k)
        res = solve_gradient(lambda v: float(np.sum(w * (v - y) ** 2)), 0.0, step=0.1, tol=1e-9)
        worst = max(worst, abs(res.z - z))
    verdict(2, "closed form vs descent", worst <= 1e-6, f"max |delta| {worst:.2e} over 50 datasets",
            time.perf_counter() - t, 10)


def test_criterion_3_fixed_point_vs_grid(verdict):
    t = time.perf_counter()
    worst_gap, worst_res = 0.0, 0.0
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        n = int(rng.integers(2, 11))
        ds = Dataset(rng.uniform(0, 5, (n, 1)), rng.normal(0, 3, n))
        x = rng.uniform(0, 5)
        res = solve_fixed_point([x], ds)
        worst_gap = max(worst_gap, abs(res.z - grid_minimizer(x, ds)))
        inv = 1.0 / np.sqrt((x - ds.X[:, 0]) ** 2 + (res.z - ds.y) ** 2)
        worst_res = max(worst_res, abs(np.sum((res.z - ds.y) * inv)) / inv.sum())
    ok = worst_gap <= 2e-4 and worst_res <= 1e-6
    verdict(3, "fixed point vs grid", ok,
            f"max |z - grid| {worst_gap:.2e}, max residual / sum(1/d) {worst_res:.2e} over 20 datasets",
            time.perf_counter() - t, 10)


def _suite(config_fn):
    rows = []
    for seed in SUITE_SEEDS:
        m = run_benchmark(config_fn(seed)).metrics
        # "mae" is scored on the interior grid only
        rows.append((seed, m["xaxis"]["mae"], m["lasso"]["mae"]))
    return rows


def test_criterion_4_sine_superiority(verdict):
    t = time.perf_counter()
    rows = _suite(sine_suite_config)
    ok = all(x < l for _, x, l in rows)
    detail = ", ".join(f"seed {s}: {x:.4f} vs {l:.4f}" for s, x, l in rows)
    verdict(4, "sine superiority (x-axis vs lasso interior MAE)", ok, detail, time.perf_counter() - t, 60)


def test_criterion_5_quadratic_competitiveness(verdict):
    t = time.perf_counter()
    rows = _suite(square_suite_config)
    ratios = [x / l for _, x, l in rows]
    detail = ", ".join(f"seed {s}: ratio {x / l:.3f}" for s, x, l in rows)
    verdict(5, "quadratic competitiveness (ratio <= 1.5)", max(ratios) <= 1.5, detail, time.perf_counter() - t, 60)


def test_criterion_6_variance_matching(verdict):
    t = time.perf_counter()
    spec = SynthSpec(target_function="sine", n=200, domain=[[0.0, 4 * np.pi]], noise_low=1.0, noise_high=1.0, seed=0)
    ds = gen_synthetic(spec)
    res = tune_r(ds, explained_fraction=1.0)
    verdict(6, "variance matching", abs(res.variance_ratio - 1) <= 0.1,
            f"Var(e)/Var(Y) = {res.variance_ratio:.4f} at r = {res.kernel.r:.6g}", time.perf_counter() - t, 20)


def test_criterion_7_noise_recovery(verdict):
    t = time.perf_counter()
    spec = SynthSpec(target_function="square", n=2000, domain=[[1.0, 2.0]], noise_low=0.5, noise_high=1.5, seed=0)
    ds, M = gen_synthetic(spec, return_multipliers=True)
    f = true_function(spec, ds.X)
    # noise share implied by the true multipliers
    oracle = population_variance(M) * np.mean(f**2) / population_variance(ds.y)
    res = iterate_randomness(ds)
    share = 1.0 - res.explained_fraction
    ok = 0.4 * oracle <= share <= 2.5 * oracle
    verdict(7, "noise recovery", ok,
            f"1 - EF = {share:.4f}, oracle {oracle:.4f}, band [{0.4 * oracle:.4f}, {2.5 * oracle:.4f}]",
            time.perf_counter() - t, 60)


def _kernel_invariants(rng):
    failures = 0
    d = np.sort(rng.uniform(1e-3, 4.0, 200))
    for k in KERNELS:
        w = np.array([weight(k, [v]) for v in d])
        wn = np.array([weight(k, [-v]) for v in d])
        failures += int(np.any(w != wn)) + int(np.any(w <= 0)) + int(np.any(np.diff(w) > 0))
    return failures


def _estimator_invariants(rng):
    failures = 0
    for _ in range(200):
        n = int(rng.integers(1, 15))
        ds = Dataset(rng.uniform(-5, 5, (n, 1)), rng.normal(0, 10, n))
        x = rng.uniform(-6, 6)
        k = KERNELS[int(rng.integers(len(KERNELS)))]
        z = predict_at([x], ds, k)
        failures += not (ds.y.min() <= z <= ds.y.max())
        c, a = rng.uniform(-100, 100), rng.uniform(-50, 50)
        zc = predict_at([x], Dataset(ds.X, ds.y + c), k)
        failures += abs(zc - z - c) > 1e-12 * max(1.0, np.abs(ds.y + c).max())
        za = predict_at([x], Dataset(ds.X, ds.y * a), k)
        failures += abs(za - a * z) > 1e-12 * max(1.0, abs(a) * np.abs(ds.y).max())
        z1 = predict_at([x], ds, KernelSpec("exp_base", r=1 + 1e-9))
        failures += abs(z1 - ds.y.mean()) > 1e-6 * max(abs(ds.y.mean()), np.abs(ds.y).max())
    return failures


def _fixed_point_invariants(rng):
    failures = 0
    for _ in range(30):
        n = int(rng.integers(2, 13))
        ds = Dataset(rng.uniform(0, 5, (n, 1)), rng.normal(0, 3, n))
        x = [rng.uniform(0, 5)]
        res = solve_fixed_point(x, ds, keep_trace=True)
        costs = [euclid_cost(x, z, ds) for z in res.trace]
        failures += any(b > a + 1e-12 for a, b in zip(costs, costs[1:]))
    return failures


def _lasso_invariants(rng):
    failures = 0
    x = rng.uniform(0, 3, 80)
    ds = Dataset(x.reshape(-1, 1), x**2 * rng.uniform(0.5, 1.5, 80))
    norms = [np.abs(fit_lasso(ds, 5, lam, tol=1e-12).standardized_coef_).sum() for lam in np.geomspace(1e-4, 10, 20)]
    failures += any(b > a + 1e-9 for a, b in zip(norms, norms[1:]))
    for degree in (1, 2, 3):
        xs = rng.uniform(-1, 1.5, 60)
        ys = np.sin(2 * xs) + 0.1 * rng.normal(size=60)
        A = np.column_stack([xs**p for p in range(degree + 1)])
        ref = np.linalg.solve(A.T @ A, A.T @ ys)
        m = fit_lasso(Dataset(xs.reshape(-1, 1), ys), degree, 0.0, tol=1e-13, max_iter=10**6)
        failures += not np.allclose(m.coefficients, ref, atol=1e-6, rtol=1e-6)
    return failures


def _report_invariants():
    cfg = {"data": {"synthetic": {"target_function": "sine", "n": 120, "domain": [[0.0, 6.0]], "seed": 4}},
           "lasso": {"lambda_grid": [1e-4, 1e-2]}}
    report = BenchmarkReport.from_json(run_benchmark(cfg).to_json())
    metrics, adv = rescore(report)
    failures = 0
    for method, values in metrics.items():
        for key, v in values.items():
            ref = report.metrics[method][key]
            if v is None or ref is None:
                failures += (v is None) != (ref is None)
            else:
                failures += abs(v - ref) > 1e-12 * max(1.0, abs(ref))
    failures += abs(adv - report.percent_advantage) > 1e-12 * max(1.0, abs(adv))
    return failures


def test_criterion_8_invariant_suites(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(8)
    counts = {
        "kernel": _kernel_invariants(rng),
        "estimator": _estimator_invariants(rng),
        "fixed point": _fixed_point_invariants(rng),
        "lasso": _lasso_invariants(rng),
        "report": _report_invariants(),
    }
    detail = ", ".join(f"{k} {v} failures" for k, v in counts.items())
    verdict(8, "invariant suites", sum(counts.values()) == 0, detail, time.perf_counter() - t, 30)
