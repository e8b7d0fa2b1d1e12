"""Sample data model, CSV ingestion, normalization and synthetic data."""

import csv
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._rng import SplitMix64
from .exceptions import DataError, ValidationError

TARGET_FUNCTIONS = ("square", "sine", "linear", "polynomial")
NORMALIZE_MODES = ("zscore", "minmax", "none")


@dataclass(frozen=True)
class Sample:
    predictors: tuple
    response: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of ``n`` samples with ``b`` predictors each.

    ``X`` has shape ``(n, b)`` and ``y`` shape ``(n,)``; both are stored as
    read-only float64 arrays so a dataset can be shared between workers.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = ()
    response_name: str = "y"

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValidationError(f"predictors must form an (n, b) array with b >= 1, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ValidationError(f"{X.shape[0]} predictor rows but {y.shape[0]} responses")
        if y.shape[0] < 1:
            raise ValidationError("a dataset needs at least one sample")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset values must be finite")
        names = tuple(self.feature_names) or default_feature_names(X.shape[1])
        if len(names) != X.shape[1]:
            raise ValidationError(f"{len(names)} feature names for {X.shape[1]} predictor columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dimension(self):
        return self.X.shape[1]

    @property
    def columns(self):
        return self.feature_names + (self.response_name,)

    @property
    def samples(self):
        return [Sample(tuple(float(v) for v in row), float(t)) for row, t in zip(self.X, self.y)]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.columns == other.columns
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.response_name)

    def without(self, i):
        """Copy with sample ``i`` removed."""
        keep = np.ones(self.n, dtype=bool)
        keep[i] = False
        return Dataset(self.X[keep], self.y[keep], self.feature_names, self.response_name)

    def to_bytes(self):
        return self.X.tobytes() + self.y.tobytes()


def default_feature_names(b):
    return ("x",) if b == 1 else tuple(f"x{a + 1}" for a in range(b))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def format_number(value):
    """Shortest decimal text that round-trips to the same double."""
    return repr(float(value))


def load_csv(path, response_column="y"):
    """Read a header-first numeric CSV into a :class:`Dataset`.

    Every column other than ``response_column`` becomes a predictor, in
    file order.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"data file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty (no header row)") from None
        header = [h.strip() for h in header]
        seen = set()
        for name in header:
            if not name:
                raise DataError(f"{path}: empty column name in header")
            if name in seen:
                raise DataError(f"{path}: duplicate column name {name!r} in header")
            seen.add(name)
        if response_column not in seen:
            raise DataError(f"{path}: response column {response_column!r} not in header {header}")
        if len(header) < 2:
            raise DataError(f"{path}: need at least one predictor column besides {response_column!r}")

        rows = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {row_no} has {len(row)} cells, header has {len(header)}")
            values = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell.strip())
                except ValueError:
                    raise DataError(f"{path}: row {row_no}, column {col!r}: cannot parse {cell!r} as a number") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {row_no}, column {col!r}: non-finite value {cell!r}")
                values.append(v)
            rows.append(values)

    if not rows:
        raise DataError(f"{path}: no data rows after the header")
    table = np.array(rows, dtype=np.float64)
    j = header.index(response_column)
    pred_cols = [k for k in range(len(header)) if k != j]
    return Dataset(
        table[:, pred_cols],
        table[:, j],
        tuple(header[k] for k in pred_cols),
        response_column,
    )


def write_csv(dataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset.columns)
        for row, t in zip(dataset.X, dataset.y):
            writer.writerow([format_number(v) for v in row] + [format_number(t)])


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a seeded synthetic dataset.

    ``response = f(x) * M`` with ``M ~ Uniform[noise_low, noise_high]``. For
    ``b > 1`` the target is the sum of the one-dimensional function over the
    predictor coordinates. ``coefficients`` (intercept first) parameterize
    ``linear`` (default ``[0, 1]``) and are required for ``polynomial``.
    """

    target_function: str = "sine"
    n: int = 100
    domain: tuple = ((0.0, 1.0),)
    noise_low: float = 1.0
    noise_high: float = 1.0
    seed: int = 0
    coefficients: Optional[tuple] = None

    def __post_init__(self):
        if self.target_function not in TARGET_FUNCTIONS:
            raise ValidationError(f"target_function must be one of {TARGET_FUNCTIONS}, got {self.target_function!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}")
        domain = _as_domain(self.domain)
        for lo, hi in domain:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValidationError(f"domain interval [{lo}, {hi}] must be finite and nonempty (low <= high)")
        lo, hi = float(self.noise_low), float(self.noise_high)
        if not (0 < lo):
            raise ValidationError(f"noise_low must be > 0, got {lo}")
        if not lo <= hi:
            raise ValidationError(f"invariant noise_low <= noise_high violated ({lo} > {hi})")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        coef = self.coefficients
        if coef is not None:
            coef = tuple(float(c) for c in coef)
            if not coef:
                raise ValidationError("coefficients must be nonempty")
        if self.target_function == "polynomial" and coef is None:
            raise ValidationError("polynomial target needs coefficients")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "noise_low", lo)
        object.__setattr__(self, "noise_high", hi)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "coefficients", coef)

    @property
    def dimension(self):
        return len(self.domain)

    def to_dict(self):
        d = asdict(self)
        d["domain"] = [list(iv) for iv in self.domain]
        if self.coefficients is None:
            del d["coefficients"]
        else:
            d["coefficients"] = list(self.coefficients)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        allowed = {"target_function", "n", "domain", "noise_low", "noise_high", "seed", "coefficients"}
        unknown = set(d) - allowed
        if unknown:
            raise ValidationError(f"unknown SynthSpec fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"SynthSpec JSON is malformed: {exc}") from None
        if not isinstance(d, dict):
            raise ValidationError("SynthSpec JSON must be an object")
        return cls.from_dict(d)


def _as_domain(domain):
    arr = np.asarray(domain, dtype=np.float64)
    if arr.ndim == 1 and arr.shape == (2,):
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValidationError(f"domain must be a [low, high] pair per dimension, got {domain!r}")
    return tuple((float(lo), float(hi)) for lo, hi in arr)


def true_function(spec, X):
    """Noise-free target of ``spec`` at predictor rows ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    kind = spec.target_function
    if kind == "square":
        g = X**2
    elif kind == "sine":
        g = np.sin(X)
    else:
        coef = spec.coefficients or (0.0, 1.0)
        # Horner, highest power first
        g = np.zeros_like(X)
        for c in reversed(coef):
            g = g * X + c
    return g.sum(axis=1)


def gen_synthetic(spec, return_multipliers=False):
    """Draw a dataset from ``spec``.

    Per sample the stream yields ``b`` predictor uniforms followed by one
    noise uniform, so equal specs give bit-identical datasets.

    Returns the :class:`Dataset`, or ``(dataset, multipliers)`` when
    ``return_multipliers`` is set (the true noise factors, for oracles).
    """
    b = spec.dimension
    rng = SplitMix64(spec.seed)
    u = rng.uniform(spec.n * (b + 1)).reshape(spec.n, b + 1)
    lo = np.array([iv[0] for iv in spec.domain])
    hi = np.array([iv[1] for iv in spec.domain])
    X = lo + (hi - lo) * u[:, :b]
    M = spec.noise_low + (spec.noise_high - spec.noise_low) * u[:, b]
    y = true_function(spec, X) * M
    ds = Dataset(X, y)
    if return_multipliers:
        return ds, M
    return ds


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def normalize(dataset, mode="none", columns=None):
    """Rescale selected columns; returns ``(dataset, params)``.

    ``params`` maps column name to ``{"mode", "offset", "scale"}`` with
    ``normalized = (value - offset) / scale``. ``columns=None`` selects every
    column, response included.
    """
    if mode not in NORMALIZE_MODES:
        raise ValidationError(f"normalize mode must be one of {NORMALIZE_MODES}, got {mode!r}")
    if mode == "none":
        return dataset, {}
    names = dataset.columns
    selected = list(names) if columns is None else list(columns)
    for c in selected:
        if c not in names:
            raise ValidationError(f"unknown column {c!r}; dataset has {names}")
    table = np.column_stack([dataset.X, dataset.y])
    params = {}
    for c in selected:
        j = names.index(c)
        col = table[:, j]
        if mode == "zscore":
            offset, scale = float(col.mean()), float(col.std())
        else:
            offset, scale = float(col.min()), float(col.max() - col.min())
        if not scale > 0:
            raise DataError(f"column {c!r} has zero spread; cannot apply {mode} normalization")
        table[:, j] = (col - offset) / scale
        params[c] = {"mode": mode, "offset": offset, "scale": scale}
    return _from_table(dataset, table), params


def inverse_normalize(dataset, params):
    table = np.column_stack([dataset.X, dataset.y])
    names = dataset.columns
    for c, p in params.items():
        j = names.index(c)
        table[:, j] = table[:, j] * p["scale"] + p["offset"]
    return _from_table(dataset, table)


def _from_table(template, table):
    return Dataset(table[:, :-1], table[:, -1], template.feature_names, template.response_name)


class Normalizer(TransformerMixin, BaseEstimator):
    """Column-wise zscore/minmax scaler for predictor arrays.

    Uses population standard deviation and refuses zero-spread columns
    instead of silently leaving them unscaled.
    """

    def __init__(self, mode="zscore"):
        self.mode = mode

    def fit(self, X, y=None):
        X = _as_2d(X)
        if self.mode not in NORMALIZE_MODES:
            raise ValidationError(f"mode must be one of {NORMALIZE_MODES}, got {self.mode!r}")
        if self.mode == "none":
            self.offset_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        elif self.mode == "zscore":
            self.offset_, self.scale_ = X.mean(axis=0), X.std(axis=0)
        else:
            self.offset_, self.scale_ = X.min(axis=0), X.max(axis=0) - X.min(axis=0)
        bad = np.flatnonzero(~(self.scale_ > 0))
        if bad.size:
            raise DataError(f"column {int(bad[0])} has zero spread; cannot apply {self.mode} normalization")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        return (_as_2d(X) - self.offset_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "scale_")
        return _as_2d(X) * self.scale_ + self.offset_


def _as_2d(X):
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(-1, 1) if X.ndim == 1 else X
