"""Weight-function families applied to predictor differences.

Per-dimension differences are first folded into one combined squared
distance ``s`` (``sum``: the squared Euclidean norm, ``product``: the product
of squared coordinate differences), then a family maps ``s`` to a weight:

=====================  ================================
inverse_power          ``1 / (s**(p/2) + shift)``
inverse_power_shifted  same, shift expected > 0
exp_base               ``r**(-s)``
exp_base_shifted       ``1 / (r**s + shift)``
uniform                ``1``
=====================  ================================

For one predictor both modes give ``s = delta**2``.
"""

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import SingularWeightError, ValidationError

FAMILIES = ("inverse_power", "inverse_power_shifted", "exp_base", "exp_base_shifted", "uniform")
MULTIDIM_MODES = ("sum", "product")
EXP_FAMILIES = ("exp_base", "exp_base_shifted")


@dataclass(frozen=True)
class KernelSpec:
    family: str = "exp_base"
    p: float = 2.0
    shift: float = 0.0
    r: Optional[float] = None
    multidim_mode: str = "sum"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"kernel family must be one of {FAMILIES}, got {self.family!r}")
        if self.multidim_mode not in MULTIDIM_MODES:
            raise ValidationError(f"multidim_mode must be one of {MULTIDIM_MODES}, got {self.multidim_mode!r}")
        p, shift = float(self.p), float(self.shift)
        if not (math.isfinite(p) and p > 0):
            raise ValidationError(f"power p must be a positive finite number, got {self.p!r}")
        if not (math.isfinite(shift) and shift >= 0):
            raise ValidationError(f"shift must be a nonnegative finite number, got {self.shift!r}")
        r = self.r
        if self.family in EXP_FAMILIES:
            if r is None:
                raise ValidationError(f"{self.family} needs a base r > 1")
            r = float(r)
            if not (math.isfinite(r) and r > 1):
                raise ValidationError(f"base r must exceed 1 (got {self.r!r})")
            if self.family == "exp_base" and shift != 0:
                raise ValidationError("exp_base takes no shift; use exp_base_shifted")
        elif r is not None:
            raise ValidationError(f"{self.family} does not take a base r")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "r", r)

    @property
    def singular(self):
        """True when zero distance gives an infinite weight."""
        return self.family in ("inverse_power", "inverse_power_shifted") and self.shift == 0

    def with_params(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return KernelSpec(**d)

    def to_dict(self):
        return {
            "family": self.family,
            "p": self.p,
            "shift": self.shift,
            "r": self.r,
            "multidim_mode": self.multidim_mode,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"family", "p", "shift", "r", "multidim_mode"}
        if unknown:
            raise ValidationError(f"unknown KernelSpec fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_json(self):
        return json.dumps(self.to_dict())


def _fmt(v):
    v = float(v)
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def describe(spec):
    """Canonical one-line text form, e.g. ``exp_base(r=1.2,mode=sum)``."""
    mode = f"mode={spec.multidim_mode}"
    if spec.family == "uniform":
        return "uniform"
    if spec.family.startswith("inverse_power"):
        parts = [f"p={_fmt(spec.p)}"]
        if spec.family == "inverse_power_shifted" or spec.shift > 0:
            parts.append(f"k={_fmt(spec.shift)}")
        return f"inverse_power({','.join(parts + [mode])})"
    parts = [f"r={_fmt(spec.r)}"]
    if spec.family == "exp_base_shifted":
        parts.append(f"q={_fmt(spec.shift)}")
    return f"exp_base({','.join(parts + [mode])})"


def combined_sq_distance(deltas, mode="sum"):
    """Fold ``(..., b)`` coordinate differences into ``s`` of shape ``(...)``."""
    d2 = np.square(np.asarray(deltas, dtype=np.float64))
    if mode == "sum":
        return d2.sum(axis=-1)
    if mode == "product":
        return d2.prod(axis=-1)
    raise ValidationError(f"multidim_mode must be one of {MULTIDIM_MODES}, got {mode!r}")


def pairwise_sq_distance(A, B, mode="sum"):
    """``s[i, j]`` between rows of ``A`` (m, b) and ``B`` (n, b)."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if mode == "sum":
        out = np.zeros((A.shape[0], B.shape[0]))
        for a in range(A.shape[1]):
            diff = A[:, a, None] - B[None, :, a]
            out += diff * diff
        return out
    out = np.ones((A.shape[0], B.shape[0]))
    for a in range(A.shape[1]):
        diff = A[:, a, None] - B[None, :, a]
        out *= diff * diff
    return out


def weights_from_sq(spec, s):
    """Vectorized weights for combined squared distances ``s``.

    Singular entries (``s == 0`` under an unshifted inverse power) come back
    as ``inf``; callers resolve them with an exact-match policy. Overflow of
    ``r**s`` saturates to weight 0.
    """
    s = np.asarray(s, dtype=np.float64)
    fam = spec.family
    if fam == "uniform":
        return np.ones_like(s)
    if fam in EXP_FAMILIES:
        decay = np.exp(-s * math.log(spec.r))
        if fam == "exp_base":
            return decay
        # 1/(r**s + q) rewritten to stay finite when r**s overflows
        return decay / (1.0 + spec.shift * decay)
    with np.errstate(divide="ignore", over="ignore"):
        base = s if spec.p == 2 else s ** (spec.p / 2)
        return 1.0 / (base + spec.shift)


def weight(spec, delta):
    """Weight of one predictor difference vector ``delta``."""
    delta = np.atleast_1d(np.asarray(delta, dtype=np.float64))
    if delta.ndim != 1:
        raise ValidationError("delta must be a vector")
    s = combined_sq_distance(delta, spec.multidim_mode)
    if spec.singular and s == 0:
        raise SingularWeightError(f"{describe(spec)} is singular at zero distance")
    w = float(weights_from_sq(spec, s))
    if math.isinf(w):
        raise SingularWeightError(f"{describe(spec)} overflowed at distance {float(s)!r}")
    return w
