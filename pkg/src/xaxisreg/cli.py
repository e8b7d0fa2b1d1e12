"""Command-line interface: ``xaxisreg {gen,fit,plotdata,tune,bench}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

import argparse
import csv
import itertools
import json
import os
import sys

import numpy as np

from .bench import BenchmarkError, load_config, percent_advantage, run_benchmark
from .dataset import SynthSpec, format_number, gen_synthetic, load_csv, write_csv
from .estimator import DEFAULT_POLICY, POLICIES, predict_grid
from .exceptions import ValidationError, XAxisError
from .kernels import EXP_FAMILIES, FAMILIES, MULTIDIM_MODES, KernelSpec, describe
from .tuning import DEFAULT_R_BOUNDS, iterate_randomness, tune_r, tune_two_param

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
DEFAULT_GRID_POINTS = 101


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse would print usage and exit 2 itself; route through main instead
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text, name, count=None):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"--{name} expects {count} comma-separated numbers, got {text!r}")
    return vals


def parse_grid(text):
    """``start:end:count`` -> ``count`` points from start to end inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must look like start:end:count, got {text!r}")
    try:
        start, end = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise UsageError(f"grid must look like start:end:count, got {text!r}") from None
    if count < 1 or not (np.isfinite(start) and np.isfinite(end)):
        raise UsageError(f"grid needs finite endpoints and count >= 1, got {text!r}")
    if count == 1:
        return np.array([start])
    # start + (i / (count - 1)) * span keeps decimal grids like 0:1:11 exact
    g = start + (np.arange(count) / (count - 1)) * (end - start)
    g[-1] = end
    return g


def _grid_for(args, dataset):
    b = dataset.dimension
    if args.grid:
        axes = [parse_grid(g) for g in args.grid]
        if len(axes) == 1 and b > 1:
            axes = axes * b
    else:
        axes = [np.linspace(c.min(), c.max(), DEFAULT_GRID_POINTS) for c in dataset.X.T]
    if len(axes) != b:
        raise UsageError(f"data has {b} predictors but {len(axes)} --grid axes were given")
    if b == 1:
        return axes[0].reshape(-1, 1)
    return np.array(list(itertools.product(*axes)), dtype=np.float64)


def _read_json_arg(text, what):
    if not text.lstrip().startswith("{"):
        if not os.path.isfile(text):
            raise FileNotFoundError(f"{what} file not found: {text}")
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} is not valid JSON: {exc}") from None


def _kernel_from_args(args):
    if args.kernel_json:
        d = _read_json_arg(args.kernel_json, "--kernel-json")
        if not isinstance(d, dict):
            raise UsageError("--kernel-json must be a JSON object")
        return KernelSpec.from_dict(d)
    r = args.r
    if args.kernel in EXP_FAMILIES and r is None:
        r = 2.0
    return KernelSpec(args.kernel, p=args.p, shift=args.shift, r=r, multidim_mode=args.multidim_mode)


def _load_data(args):
    return load_csv(args.data, args.response)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen(args):
    base = {}
    if args.spec:
        base = _read_json_arg(args.spec, "--spec")
        if not isinstance(base, dict):
            raise UsageError("--spec must be a JSON object")
    overrides = {
        "target_function": args.fn,
        "n": args.n,
        "seed": args.seed,
        "domain": [_floats(d, "domain", 2) for d in args.domain] if args.domain else None,
        "coefficients": _floats(args.coef, "coef") if args.coef else None,
    }
    if args.noise:
        overrides["noise_low"], overrides["noise_high"] = _floats(args.noise, "noise", 2)
    base.update({k: v for k, v in overrides.items() if v is not None})
    spec = SynthSpec.from_dict(base)
    ds = gen_synthetic(spec)
    write_csv(ds, args.output)
    print(spec.to_json())
    return EXIT_OK


def _curve(args):
    ds = _load_data(args)
    kernel = _kernel_from_args(args)
    grid = _grid_for(args, ds)
    curve = predict_grid(grid, ds, kernel, args.policy, n_jobs=args.threads)
    curve.to_csv(args.output)
    return ds, kernel, curve


def cmd_fit(args):
    ds, kernel, curve = _curve(args)
    print(f"{describe(kernel)} policy={args.policy}: {len(curve)} predictions from {ds.n} samples -> {args.output}")
    return EXIT_OK


def _points_path(args):
    if args.points_output:
        return args.points_output
    stem, ext = os.path.splitext(args.output)
    return f"{stem}.points{ext or '.csv'}"


def cmd_plotdata(args):
    ds, kernel, curve = _curve(args)
    path = _points_path(args)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.feature_names) + [ds.response_name, "role"])
        for row, v in zip(ds.X, ds.y):
            w.writerow([format_number(a) for a in row] + [format_number(v), "given"])
        for row, v in zip(curve.grid, curve.values):
            w.writerow([format_number(a) for a in row] + [format_number(v), "estimate"])
    print(f"{describe(kernel)}: {len(curve)} estimates -> {args.output}; {ds.n} given + {len(curve)} estimate points -> {path}")
    return EXIT_OK


def cmd_tune(args):
    ds = _load_data(args)
    r_bounds = (args.r_min, args.r_max)
    if args.mode == "variance":
        res = tune_r(
            ds, args.family, r_bounds, args.explained_fraction, args.q, args.multidim_mode, args.policy,
            n_jobs=args.threads,
        )
    elif args.mode == "iterate":
        res = iterate_randomness(
            ds, args.family, args.max_rounds, args.alpha, r_bounds, args.tol, args.q, args.multidim_mode,
            args.policy, n_jobs=args.threads,
        )
    else:
        family = args.family if args.family_given else "exp_base_shifted"
        res = tune_two_param(
            ds, family, r_bounds, (args.q_min, args.q_max), args.lambda_var, args.lambda_fit,
            args.multidim_mode, args.policy, n_jobs=args.threads,
        )
    text = res.to_json() + "\n"
    if args.output:
        _write_text(args.output, text)
    else:
        sys.stdout.write(text)
    k = res.kernel
    out = sys.stderr if not args.output else sys.stdout
    print(
        f"{args.mode}: {describe(k)} variance_ratio={format_number(res.variance_ratio)} "
        f"explained_fraction={format_number(res.explained_fraction)} rounds={len(res.rounds)} converged={res.converged}",
        file=out,
    )
    return EXIT_OK


def cmd_bench(args):
    if args.print_advantage is not None:
        base, new = args.print_advantage
        print(f"{percent_advantage(base, new):.5f}")
        if not args.config:
            return EXIT_OK
    if not args.config:
        raise UsageError("bench needs a config path (or --print-advantage A B)")
    cfg = load_config(args.config)
    if args.threads is not None:
        cfg["threads"] = args.threads
    report = run_benchmark(cfg)
    out = args.output or os.path.splitext(args.config)[0] + ".report.json"
    sidecar = report.write(out)
    for m, met in report.metrics.items():
        print(f"{m}: mae={met['mae']:.6g} rmse={met['rmse']:.6g}")
    if report.percent_advantage is not None:
        print(f"percent advantage (lasso vs x-axis MAE): {report.percent_advantage:.5f}")
    print(f"report -> {out}; predictions -> {sidecar}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_data(p):
    p.add_argument("--data", required=True, help="input CSV (header row, comma separated)")
    p.add_argument("--response", default="y", help="response column name (default: y)")


def _add_common(p):
    p.add_argument("--multidim-mode", choices=MULTIDIM_MODES, default="sum")
    p.add_argument("--policy", choices=POLICIES, default=DEFAULT_POLICY, help="exact-match policy")
    p.add_argument("--threads", type=int, default=None, help="worker threads (outputs do not change)")


def _add_curve(p):
    _add_data(p)
    p.add_argument("--kernel", choices=FAMILIES, default="exp_base")
    p.add_argument("--r", type=float, default=None, help="base of the exponential families (default 2)")
    p.add_argument("--p", type=float, default=2.0, help="power of the inverse-power families")
    p.add_argument("--shift", type=float, default=0.0, help="denominator shift (k or q)")
    p.add_argument("--kernel-json", default=None, help="KernelSpec JSON (inline or file); overrides kernel flags")
    p.add_argument("--grid", action="append", default=None, metavar="START:END:COUNT",
                   help="inclusive evaluation grid; repeat once per predictor (default: data range, 101 points)")
    p.add_argument("-o", "--output", required=True, help="prediction CSV to write")
    _add_common(p)


def build_parser():
    parser = _Parser(prog="xaxisreg", description="Pointwise distance-weighted regression toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a seeded synthetic dataset")
    g.add_argument("--spec", help="SynthSpec JSON (inline or file); flags override its fields")
    g.add_argument("--fn", choices=("square", "sine", "linear", "polynomial"))
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--noise", metavar="LOW,HIGH", help="multiplicative noise range")
    g.add_argument("--domain", action="append", metavar="LOW,HIGH", help="predictor range; repeat per dimension")
    g.add_argument("--coef", metavar="C0,C1,...", help="polynomial coefficients, intercept first")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="evaluate the estimator over a grid")
    _add_curve(f)
    f.set_defaults(func=cmd_fit)

    pd = sub.add_parser("plotdata", help="grid estimates plus the given points with a role column")
    _add_curve(pd)
    pd.add_argument("--points-output", default=None, help="points CSV (default: <output stem>.points.csv)")
    pd.set_defaults(func=cmd_plotdata)

    t = sub.add_parser("tune", help="select kernel parameters from the data")
    _add_data(t)
    t.add_argument("--mode", choices=("variance", "iterate", "two-param"), default="variance")
    t.add_argument("--family", choices=EXP_FAMILIES, default=None)
    t.add_argument("--explained-fraction", type=float, default=1.0)
    t.add_argument("--q", type=float, default=0.0, help="fixed q for exp_base_shifted")
    t.add_argument("--alpha", type=float, default=0.5, help="damping of the iterate mode")
    t.add_argument("--max-rounds", type=int, default=25)
    t.add_argument("--tol", type=float, default=1e-3, help="explained-fraction change that stops iterate")
    t.add_argument("--r-min", type=float, default=DEFAULT_R_BOUNDS[0])
    t.add_argument("--r-max", type=float, default=DEFAULT_R_BOUNDS[1])
    t.add_argument("--q-min", type=float, default=0.0)
    t.add_argument("--q-max", type=float, default=10.0)
    t.add_argument("--lambda-var", type=float, default=0.7)
    t.add_argument("--lambda-fit", type=float, default=0.3)
    t.add_argument("-o", "--output", default=None, help="TuningResult JSON (default: standard output)")
    _add_common(t)
    t.set_defaults(func=cmd_tune)

    b = sub.add_parser("bench", help="compare against the polynomial lasso baseline")
    b.add_argument("config", nargs="?", help="benchmark config JSON")
    b.add_argument("-o", "--output", default=None, help="report JSON (default: <config stem>.report.json)")
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("--print-advantage", nargs=2, type=float, metavar=("BASE_ERR", "NEW_ERR"),
                   help="print (BASE_ERR / NEW_ERR - 1) * 100")
    b.set_defaults(func=cmd_bench)
    return parser


def _exit_code(exc):
    if isinstance(exc, BenchmarkError):
        return _exit_code(exc.cause)
    if isinstance(exc, ValidationError):
        return EXIT_USAGE
    return EXIT_RUNTIME


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "tune":
            args.family_given = args.family is not None
            if args.family is None:
                args.family = "exp_base"
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (XAxisError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
