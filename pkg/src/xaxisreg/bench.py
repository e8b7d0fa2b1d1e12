"""Error metrics, benchmark orchestration and reports.

A benchmark compares the pointwise x-axis regressor against the polynomial
lasso baseline. Synthetic runs score both methods on a dense grid against
the noise-free target; CSV runs score on a held-out split.
"""

import copy
import csv
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ._accumulate import compensated_sum
from ._rng import SplitMix64
from .baselines import DEFAULT_LAMBDA_GRID, fit_lasso, predict_lasso, select_lambda
from .dataset import SynthSpec, format_number, gen_synthetic, load_csv, normalize, true_function
from .estimator import predict_points
from .exceptions import ValidationError, XAxisError
from .kernels import KernelSpec
from .tuning import DEFAULT_R_BOUNDS, iterate_randomness, tune_r, tune_two_param

SCHEMA_VERSION = 1
METHODS = ("xaxis", "lasso")


class BenchmarkError(XAxisError):
    """Failure inside a benchmark stage (``data``, ``tune``, ``fit``, ``eval``)."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


def _check_pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.size != target.size:
        raise ValidationError(f"length mismatch: {pred.size} predictions vs {target.size} targets")
    if pred.size == 0:
        raise ValidationError("cannot score empty vectors")
    return pred, target


def mae(pred, target):
    pred, target = _check_pair(pred, target)
    return compensated_sum(np.abs(pred - target)) / pred.size


def rmse(pred, target):
    pred, target = _check_pair(pred, target)
    d = pred - target
    return math.sqrt(compensated_sum(d * d) / pred.size)


def percent_advantage(err_base, err_new):
    """How much larger the baseline error is, in percent of the new error."""
    if not (math.isfinite(err_base) and math.isfinite(err_new)):
        raise ValidationError("errors must be finite")
    if not err_new > 0:
        raise ValidationError(f"new-method error must be > 0, got {err_new}")
    return (err_base / err_new - 1.0) * 100.0


def split(dataset, test_fraction, seed):
    """Seeded shuffle, then ``floor(n * test_fraction)`` (at least 1) to test.

    Both parts keep dataset order internally.
    """
    if not 0 < test_fraction < 1:
        raise ValidationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = dataset.n
    k = max(1, int(math.floor(n * test_fraction)))
    if k >= n:
        raise ValidationError(f"split of {n} samples with fraction {test_fraction} leaves no training data")
    perm = SplitMix64(seed).permutation(n)
    test = np.sort(perm[:k])
    train = np.sort(perm[k:])
    return dataset.subset(train), dataset.subset(test)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "methods": ["xaxis", "lasso"],
    "xaxis": {
        "family": "exp_base",
        "tuning": "iterate",
        "kernel": None,
        "explained_fraction": 1.0,
        "alpha": 0.5,
        "max_rounds": 25,
        "r_bounds": list(DEFAULT_R_BOUNDS),
        "q_bounds": [0.0, 10.0],
        "lambda_var": 0.7,
        "lambda_fit": 0.3,
    },
    "lasso": {
        "degree": 5,
        "lambda_grid": [float(v) for v in DEFAULT_LAMBDA_GRID],
        "k_folds": 5,
    },
    "eval": {"grid_points": 512, "edge_fraction": 0.02},
    "threads": None,
}

_DATA_CSV_DEFAULTS = {
    "response_column": "y",
    "normalize": "none",
    "normalize_columns": None,
    "test_fraction": 0.3,
    "split_seed": 0,
}


def resolve_config(config):
    """Fill defaults so a report records every setting that produced it."""
    if not isinstance(config, dict):
        raise ValidationError("benchmark config must be a JSON object")
    unknown = set(config) - set(DEFAULT_CONFIG) - {"data"}
    if unknown:
        raise ValidationError(f"unknown benchmark config keys: {sorted(unknown)}")
    out = copy.deepcopy(DEFAULT_CONFIG)
    for key in ("xaxis", "lasso", "eval"):
        extra = set(config.get(key, {})) - set(out[key])
        if extra:
            raise ValidationError(f"unknown {key} config keys: {sorted(extra)}")
        out[key].update(config.get(key, {}))
    for key in ("methods", "threads"):
        if key in config:
            out[key] = config[key]
    data = config.get("data")
    if not isinstance(data, dict) or len(data) != 1 or not set(data) <= {"synthetic", "csv"}:
        raise ValidationError('config "data" must hold exactly one of "synthetic" or "csv"')
    if "synthetic" in data:
        out["data"] = {"synthetic": SynthSpec.from_dict(data["synthetic"]).to_dict()}
    else:
        csv_cfg = dict(_DATA_CSV_DEFAULTS)
        csv_cfg.update(data["csv"])
        if "path" not in csv_cfg:
            raise ValidationError('csv data config needs a "path"')
        out["data"] = {"csv": csv_cfg}
    methods = out["methods"]
    if not methods or any(m not in METHODS for m in methods) or len(set(methods)) != len(methods):
        raise ValidationError(f"methods must be a nonempty subset of {METHODS}, got {methods!r}")
    out["methods"] = [m for m in METHODS if m in methods]
    if out["xaxis"]["tuning"] not in ("iterate", "variance", "two-param", "none"):
        raise ValidationError(f"unknown xaxis tuning mode {out['xaxis']['tuning']!r}")
    if out["xaxis"]["tuning"] == "none" and out["xaxis"]["kernel"] is None:
        raise ValidationError('xaxis tuning "none" needs an explicit "kernel"')
    ev = out["eval"]
    if int(ev["grid_points"]) < 2 or not 0 <= ev["edge_fraction"] < 0.5:
        raise ValidationError("eval needs grid_points >= 2 and 0 <= edge_fraction < 0.5")
    return out


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class BenchmarkReport:
    config: dict
    data: dict
    metrics: dict
    percent_advantage: object
    predictions: dict
    runtime: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "data": self.data,
            "metrics": self.metrics,
            "percent_advantage": self.percent_advantage,
            "runtime_seconds": self.runtime,
            "traces": self.traces,
            "predictions": self.predictions,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValidationError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(
            config=d["config"],
            data=d["data"],
            metrics=d["metrics"],
            percent_advantage=d["percent_advantage"],
            predictions=d["predictions"],
            runtime=d.get("runtime_seconds", {}),
            traces=d.get("traces", {}),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def write(self, path):
        """Write the JSON report and a ``<stem>.predictions.csv`` sidecar."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")
        sidecar = sidecar_path(path)
        write_predictions_csv(self.predictions, sidecar)
        return sidecar


def sidecar_path(path):
    stem, _ = os.path.splitext(os.fspath(path))
    return stem + ".predictions.csv"


def write_predictions_csv(predictions, path):
    cols = [c for c in ("target",) + METHODS if c in predictions]
    query = predictions["query"]
    b = len(query[0]) if query else 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"d{a + 1}" for a in range(b)] + cols + ["region"])
        for k, q in enumerate(query):
            w.writerow([format_number(v) for v in q] + [format_number(predictions[c][k]) for c in cols] + [predictions["region"][k]])


def score(predictions, methods):
    """Metrics for each method from stored prediction vectors."""
    target = np.asarray(predictions["target"], dtype=np.float64)
    region = np.asarray(predictions["region"])
    interior = region == "interior"
    edge = region == "edge"
    out = {}
    for m in methods:
        pred = np.asarray(predictions[m], dtype=np.float64)
        entry = {"mae": mae(pred[interior], target[interior]), "rmse": rmse(pred[interior], target[interior])}
        if edge.any():
            entry["edge_mae"] = mae(pred[edge], target[edge])
            entry["edge_rmse"] = rmse(pred[edge], target[edge])
        else:
            entry["edge_mae"] = entry["edge_rmse"] = None
        out[m] = entry
    return out


def advantage_from(metrics):
    if "xaxis" in metrics and "lasso" in metrics:
        return percent_advantage(metrics["lasso"]["mae"], metrics["xaxis"]["mae"])
    return None


def rescore(report):
    """Recompute metrics and advantage; returns ``(metrics, advantage)``."""
    methods = [m for m in METHODS if m in report.metrics]
    metrics = score(report.predictions, methods)
    return metrics, advantage_from(metrics)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except BenchmarkError:
        raise
    except (XAxisError, ValueError, OSError, FloatingPointError) as exc:
        raise BenchmarkError(name, exc) from exc


def _load(config):
    data = config["data"]
    if "synthetic" in data:
        spec = SynthSpec.from_dict(data["synthetic"])
        if spec.dimension != 1:
            raise ValidationError("synthetic benchmarks use one predictor")
        ds = gen_synthetic(spec)
        info = {"source": "synthetic", "n": ds.n, "sha256": hashlib.sha256(ds.to_bytes()).hexdigest()}
        return spec, ds, ds, None, info
    c = data["csv"]
    ds = load_csv(c["path"], c["response_column"])
    with open(c["path"], "rb") as fh:
        file_hash = hashlib.sha256(fh.read()).hexdigest()
    ds, norm = normalize(ds, c["normalize"], c["normalize_columns"])
    train, test = split(ds, c["test_fraction"], c["split_seed"])
    info = {
        "source": "csv", "path": os.fspath(c["path"]), "file_sha256": file_hash, "n": ds.n,
        "n_train": train.n, "n_test": test.n, "normalization": norm,
    }
    return None, train, train, test, info


def _tune_xaxis(train, cfg, threads):
    mode = cfg["tuning"]
    if mode == "none":
        return KernelSpec.from_dict(cfg["kernel"]), None
    if mode == "iterate":
        res = iterate_randomness(train, cfg["family"], cfg["max_rounds"], cfg["alpha"], cfg["r_bounds"], n_jobs=threads)
    elif mode == "variance":
        res = tune_r(train, cfg["family"], cfg["r_bounds"], cfg["explained_fraction"], n_jobs=threads)
    else:
        res = tune_two_param(
            train, "exp_base_shifted", cfg["r_bounds"], cfg["q_bounds"], cfg["lambda_var"], cfg["lambda_fit"], n_jobs=threads
        )
    return res.kernel, res


def run_benchmark(config):
    """Run one comparison described by ``config`` and return its report.

    The run is a pure function of the config (seeds included); only the
    ``runtime_seconds`` block varies between repeats.
    """
    cfg = _stage("data", resolve_config, config)
    spec, ds, train, test, info = _stage("data", _load, cfg)
    methods = cfg["methods"]
    threads = cfg["threads"]
    if "lasso" in methods and train.dimension != 1:
        raise BenchmarkError("data", ValidationError("the lasso baseline needs a single predictor"))

    if spec is not None:
        lo, hi = spec.domain[0]
        grid = np.linspace(lo, hi, int(cfg["eval"]["grid_points"]))
        edge = cfg["eval"]["edge_fraction"] * (hi - lo)
        region = np.where((grid >= lo + edge) & (grid <= hi - edge), "interior", "edge")
        query = grid.reshape(-1, 1)
        target = true_function(spec, query)
    else:
        query = test.X
        target = test.y
        region = np.full(test.n, "interior")

    predictions = {
        "query": [[float(v) for v in row] for row in query],
        "target": [float(v) for v in target],
        "region": [str(v) for v in region],
    }
    runtime, traces = {}, {}

    if "xaxis" in methods:
        t0 = time.perf_counter()
        kernel, res = _stage("tune", _tune_xaxis, train, cfg["xaxis"], threads)
        pred = _stage("eval", predict_points, query, train.X, train.y, kernel, n_jobs=threads)
        runtime["xaxis"] = time.perf_counter() - t0
        predictions["xaxis"] = [float(v) for v in pred]
        traces["xaxis"] = {"kernel": kernel.to_dict(), "tuning": None if res is None else res.to_dict()}

    if "lasso" in methods:
        t0 = time.perf_counter()
        lc = cfg["lasso"]
        lam, cv_err = _stage("tune", select_lambda, train, lc["degree"], lc["lambda_grid"], lc["k_folds"])
        model = _stage("fit", fit_lasso, train, lc["degree"], lam)
        pred = _stage("eval", predict_lasso, model, query[:, 0])
        runtime["lasso"] = time.perf_counter() - t0
        predictions["lasso"] = [float(v) for v in pred]
        traces["lasso"] = {"lambda": lam, "cv_error": cv_err, "model": model.to_dict()}

    metrics = _stage("eval", score, predictions, methods)
    return BenchmarkReport(
        config=cfg,
        data=info,
        metrics=metrics,
        percent_advantage=advantage_from(metrics),
        predictions=predictions,
        runtime=runtime,
        traces=traces,
    )


def load_config(path):
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise BenchmarkError("data", FileNotFoundError(f"config file not found: {path}"))
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed JSON ({exc})") from None
    data = cfg.get("data", {}) if isinstance(cfg, dict) else {}
    # csv paths are relative to the config file
    if isinstance(data, dict) and isinstance(data.get("csv"), dict) and "path" in data["csv"]:
        p = data["csv"]["path"]
        if not os.path.isabs(p):
            data["csv"]["path"] = os.path.join(os.path.dirname(os.path.abspath(path)), p)
    return cfg


def sine_suite_config(seed, n=500, grid_points=512):
    """Config of the sine comparison: sin(x) on [0, 4 pi], U(0.5, 1.5) noise."""
    return {
        "data": {"synthetic": {
            "target_function": "sine", "n": n, "domain": [[0.0, 4 * math.pi]],
            "noise_low": 0.5, "noise_high": 1.5, "seed": seed,
        }},
        "eval": {"grid_points": grid_points},
    }


def square_suite_config(seed, n=500, grid_points=512):
    """Config of the quadratic comparison: x**2 on [0, 3], U(0.5, 1.5) noise."""
    return {
        "data": {"synthetic": {
            "target_function": "square", "n": n, "domain": [[0.0, 3.0]],
            "noise_low": 0.5, "noise_high": 1.5, "seed": seed,
        }},
        "eval": {"grid_points": grid_points},
    }
