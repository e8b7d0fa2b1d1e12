import json
import math

import numpy as np
import pytest

from xaxisreg.bench import (
    BenchmarkError,
    BenchmarkReport,
    mae,
    percent_advantage,
    rescore,
    resolve_config,
    rmse,
    run_benchmark,
    sidecar_path,
    sine_suite_config,
    split,
)
from xaxisreg.dataset import Dataset, write_csv
from xaxisreg.exceptions import ValidationError


class TestMetrics:
    def test_examples(self):
        t = np.array([1.0, 2.0])
        assert mae(t, t) == 0 and rmse(t, t) == 0
        assert mae(t + [1, -1], t) == 1 and rmse(t + [1, -1], t) == 1
        assert mae(t + [0, 3], t) == 1.5
        assert rmse(t + [0, 3], t) == pytest.approx(math.sqrt(4.5), rel=1e-15)

    def test_errors(self):
        with pytest.raises(ValidationError, match="length"):
            mae([1, 2], [1])
        with pytest.raises(ValidationError, match="empty"):
            rmse([], [])


class TestPercentAdvantage:
    @pytest.mark.parametrize(
        "base, new, expected",
        [
            (0.16057744, 0.15342135612367921, 4.66433),
            (0.15614923, 0.1474352255852411, 5.91039),
            (0.15644323, 0.1497225507429759, 4.48875),
        ],
    )
    def test_table_rows(self, base, new, expected):
        assert abs(percent_advantage(base, new) - expected) <= 1e-4

    def test_properties(self):
        assert percent_advantage(0.3, 0.3) == 0
        vals = [percent_advantage(1.0, e) for e in (0.5, 0.8, 1.0, 1.5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        with pytest.raises(ValidationError):
            percent_advantage(1.0, 0.0)
        with pytest.raises(ValidationError):
            percent_advantage(1.0, -1.0)


class TestSplit:
    def test_sizes_and_partition(self):
        ds = Dataset(np.arange(10.0).reshape(-1, 1), np.arange(10.0) * 3)
        train, test = split(ds, 0.3, seed=5)
        assert (train.n, test.n) == (7, 3)
        assert sorted(np.concatenate([train.y, test.y]).tolist()) == sorted(ds.y.tolist())
        again = split(ds, 0.3, seed=5)
        assert again[0] == train and again[1] == test

    def test_minimum_one_and_degenerate(self):
        ds = Dataset(np.arange(3.0).reshape(-1, 1), np.arange(3.0))
        assert split(ds, 0.1, 0)[1].n == 1
        with pytest.raises(ValidationError):
            split(Dataset([[0.0]], [1.0]), 0.5, 0)
        with pytest.raises(ValidationError):
            split(ds, 1.0, 0)


def linear_config(n=500):
    # slope 0.1: the x-axis estimator's boundary bias scales with the slope
    return {
        "data": {"synthetic": {
            "target_function": "linear", "n": n, "domain": [[0.0, 1.0]],
            "noise_low": 1.0, "noise_high": 1.0, "seed": 3, "coefficients": [1.0, 0.1],
        }},
    }


@pytest.fixture(scope="module")
def linear_report():
    return run_benchmark(linear_config())


class TestRunBenchmark:
    def test_noiseless_linear(self, linear_report):
        m = linear_report.metrics
        assert m["xaxis"]["mae"] <= 1e-3 and m["lasso"]["mae"] <= 1e-3
        assert linear_report.percent_advantage == percent_advantage(m["lasso"]["mae"], m["xaxis"]["mae"])

    def test_self_consistent_and_persistent(self, linear_report, tmp_path):
        metrics, adv = rescore(linear_report)
        assert metrics == linear_report.metrics and adv == linear_report.percent_advantage
        path = tmp_path / "r.json"
        sidecar = linear_report.write(path)
        back = BenchmarkReport.from_json(path.read_text())
        metrics, adv = rescore(back)
        for m in metrics:
            for k, v in metrics[m].items():
                assert v == pytest.approx(linear_report.metrics[m][k], rel=1e-12, abs=1e-15)
        lines = open(sidecar).read().splitlines()
        assert lines[0] == "d1,target,xaxis,lasso,region" and len(lines) == 513
        assert sidecar == sidecar_path(path)

    def test_edge_region(self, linear_report):
        region = np.array(linear_report.predictions["region"])
        q = np.array(linear_report.predictions["query"])[:, 0]
        assert np.all((q[region == "edge"] < 0.02) | (q[region == "edge"] > 0.98))
        assert (region == "interior").sum() == 512 - 2 * 11

    def test_deterministic_apart_from_runtime(self, linear_report):
        a = linear_report.to_dict()
        b = run_benchmark(linear_config()).to_dict()
        a.pop("runtime_seconds"), b.pop("runtime_seconds")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_sine_suite_single_seed(self):
        rep = run_benchmark(sine_suite_config(1))
        assert rep.metrics["xaxis"]["mae"] < rep.metrics["lasso"]["mae"]
        metrics, _ = rescore(rep)
        assert metrics == rep.metrics

    def test_csv_source(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 3, 120)
        write_csv(Dataset(x.reshape(-1, 1), np.sin(x) + 0.1 * rng.normal(size=120)), tmp_path / "d.csv")
        cfg = {"data": {"csv": {"path": str(tmp_path / "d.csv"), "normalize": "zscore", "normalize_columns": ["x"],
                                "test_fraction": 0.25, "split_seed": 4}},
               "lasso": {"lambda_grid": [1e-4, 1e-2]}}
        rep = run_benchmark(cfg)
        assert rep.data["n_train"] == 90 and rep.data["n_test"] == 30
        assert len(rep.data["file_sha256"]) == 64
        assert rep.metrics["xaxis"]["edge_mae"] is None
        assert rep.config["data"]["csv"]["split_seed"] == 4

    def test_single_method(self):
        cfg = linear_config(100)
        cfg["methods"] = ["lasso"]
        rep = run_benchmark(cfg)
        assert set(rep.metrics) == {"lasso"} and rep.percent_advantage is None

    def test_fixed_kernel(self):
        cfg = linear_config(100)
        cfg["xaxis"] = {"tuning": "none", "kernel": {"family": "exp_base", "r": 1e6}}
        rep = run_benchmark(cfg)
        assert rep.traces["xaxis"]["tuning"] is None

    @pytest.mark.parametrize(
        "cfg, stage, match",
        [
            ({"data": {"csv": {"path": "/nonexistent/x.csv"}}}, "data", "/nonexistent/x.csv"),
            ({"data": {}}, "data", "exactly one"),
            ({"data": {"synthetic": {"noise_low": 2, "noise_high": 1}}}, "data", "noise_low <= noise_high"),
            ({"data": {"synthetic": {}}, "methods": ["ridge"]}, "data", "methods"),
            ({"data": {"synthetic": {"n": 3}}, "lasso": {"k_folds": 5}}, "tune", "fold"),
        ],
    )
    def test_stage_labels(self, cfg, stage, match):
        with pytest.raises(BenchmarkError, match=match) as info:
            run_benchmark(cfg)
        assert info.value.stage == stage

    def test_resolved_config_records_defaults(self):
        cfg = resolve_config({"data": {"synthetic": {"seed": 9}}})
        assert cfg["lasso"]["degree"] == 5 and len(cfg["lasso"]["lambda_grid"]) == 20
        assert cfg["eval"] == {"grid_points": 512, "edge_fraction": 0.02}
        assert cfg["data"]["synthetic"]["seed"] == 9
