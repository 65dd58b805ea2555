"""Building blocks U(x) and the self-similar potentials built from them.

The potential is

    V(x) = Σ_n λ^{2n} U(x_n),   x_n = λ^n x + (1 − λ^n)/(1 − λ) · b,

which satisfies λ² V(λx + b) = V(x). For compactly supported blocks only
the few terms whose x_n lands in the support are evaluated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InvalidInputError

BLOCK_KINDS = ("compact_bump", "cosine", "custom_table")
DECAY_CLASSES = ("compact", "tempered", "super_exponential")
FIXED_POINT_CLAMP = 1e-9


@dataclass(frozen=True)
class BuildingBlock:
    """Unit-cell function U(x).

    ``params`` by kind:
      compact_bump: c, d (0 < c < d), h (depth, negative for a well)
      cosine:       omega, amplitude (default 1)
      custom_table: xs (sorted), ys
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ConfigurationError(f"unknown block kind {self.kind!r}; expected one of {BLOCK_KINDS}")
        p = dict(self.params)
        if self.kind == "compact_bump":
            c = float(p.get("c", 1.0))
            d = float(p.get("d", 2.0))
            h = float(p.get("h", -30.0))
            if not (0.0 < c < d) or not all(map(math.isfinite, (c, d, h))):
                raise ConfigurationError(f"compact_bump needs finite 0 < c < d, got c={c}, d={d}")
            p = {"c": c, "d": d, "h": h}
        elif self.kind == "cosine":
            omega = float(p.get("omega", 1.0))
            amp = float(p.get("amplitude", 1.0))
            if not (math.isfinite(omega) and math.isfinite(amp)):
                raise ConfigurationError("cosine block parameters must be finite")
            p = {"omega": omega, "amplitude": amp}
        else:
            xs = np.asarray(p.get("xs", []), dtype=float)
            ys = np.asarray(p.get("ys", []), dtype=float)
            if xs.ndim != 1 or xs.size < 2 or xs.shape != ys.shape:
                raise ConfigurationError("custom_table needs matching 1-D xs and ys with >= 2 samples")
            if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
                raise ConfigurationError("custom_table entries must be finite")
            if np.any(np.diff(xs) <= 0):
                raise ConfigurationError("custom_table abscissae must be strictly increasing")
            xs.setflags(write=False)
            ys.setflags(write=False)
            p = {"xs": xs, "ys": ys}
        object.__setattr__(self, "params", p)

    @classmethod
    def bump(cls, c=1.0, d=2.0, h=-30.0):
        return cls("compact_bump", {"c": c, "d": d, "h": h})

    @classmethod
    def zero(cls):
        return cls("compact_bump", {"c": 1.0, "d": 2.0, "h": 0.0})

    @property
    def support(self) -> tuple[float, float] | None:
        if self.kind == "compact_bump":
            return (self.params["c"], self.params["d"])
        if self.kind == "custom_table":
            return (float(self.params["xs"][0]), float(self.params["xs"][-1]))
        return None

    @property
    def decay_class(self) -> str:
        # a cosine block never decays; its series is only controlled by the λ^{2n} weights
        return "tempered" if self.kind == "cosine" else "compact"

    @property
    def is_compact(self) -> bool:
        return self.support is not None

    def bound(self) -> float:
        """Upper bound on |U|."""
        if self.kind == "compact_bump":
            return abs(self.params["h"])
        if self.kind == "cosine":
            return abs(self.params["amplitude"])
        return float(np.max(np.abs(self.params["ys"])))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "compact_bump":
            c, d, h = self.params["c"], self.params["d"], self.params["h"]
            t = (2.0 * x - (c + d)) / (d - c)
            inside = np.abs(t) < 1.0
            return np.where(inside, h * (1.0 - t * t) ** 3, 0.0)
        if self.kind == "cosine":
            return self.params["amplitude"] * np.cos(self.params["omega"] * x)
        xs, ys = self.params["xs"], self.params["ys"]
        return np.interp(x, xs, ys, left=0.0, right=0.0)

    def to_dict(self) -> dict:
        p = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return {"kind": self.kind, **p}

    @classmethod
    def from_dict(cls, d: dict):
        d = dict(d)
        kind = d.pop("kind", "compact_bump")
        return cls(kind, d)


def affine_orbit(x, n, lam, b):
    """x_n = λⁿ x + (1 − λⁿ)/(1 − λ) b; for λ = 1 the periodic orbit x + n b."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n)
    if lam <= 0:
        raise ConfigurationError("lambda must be positive")
    if lam == 1.0:
        return x + n * b
    loglam = math.log(lam)
    # (1 − λⁿ)/(1 − λ) written with expm1 to stay accurate for λ near 1
    geom = -np.expm1(n * loglam) / (1.0 - lam)
    return np.power(lam, n.astype(float)) * x + geom * b


@dataclass(frozen=True)
class SelfSimilarPotential:
    """V_{λ,b}(x) = Σ_{n in n_range} λ^{2n} U(x_n).

    ``n_range=None`` keeps every term (only meaningful for compact blocks,
    where each x receives a bounded number of contributions). ``lam == 1``
    gives the periodic limit Σ_n U(x + n b).
    """

    block: BuildingBlock
    lam: float
    b: float = 0.0
    n_range: tuple[int, int] | None = None

    def __post_init__(self):
        lam = float(self.lam)
        if not (lam > 0 and math.isfinite(lam)):
            raise ConfigurationError(f"lambda must be a positive finite number, got {self.lam}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "b", float(self.b))
        if self.n_range is not None:
            lo, hi = (int(v) for v in self.n_range)
            if lo > hi:
                raise ConfigurationError(f"n_range must satisfy n_min <= n_max, got {self.n_range}")
            object.__setattr__(self, "n_range", (lo, hi))
        if lam == 1.0:
            if self.b == 0.0:
                raise ConfigurationError("lambda = 1 with b = 0 repeats the same term forever")
            if not self.block.is_compact and self.n_range is None:
                raise ConfigurationError("periodic limit of a non-compact block needs an explicit n_range")
            return
        if not self.block.is_compact:
            if self.n_range is None:
                raise ConfigurationError(
                    "cosine blocks do not decay: an explicit n_range is required")
            lo, hi = self.n_range
            big = 2.0 * max(abs(lo), abs(hi)) * abs(math.log(lam))
            if big > 700.0:
                raise ConfigurationError(
                    f"weights λ^(2n) overflow for n_range {self.n_range}; choose a narrower n_range")
        else:
            c, d = self.shifted_support
            if c <= 0.0 <= d:
                raise ConfigurationError(
                    f"fixed point {self.fixed_point:g} lies inside the block support; "
                    "the series has unbounded term count there")

    @property
    def fixed_point(self) -> float:
        if self.lam == 1.0:
            return math.inf
        return self.b / (1.0 - self.lam)

    @property
    def shifted_support(self) -> tuple[float, float]:
        """Block support measured from the fixed point."""
        c, d = self.block.support
        xs = self.fixed_point
        return (c - xs, d - xs)

    def max_terms_per_point(self) -> int:
        """Upper bound on the number of terms the lazy evaluator touches at one x."""
        if self.lam == 1.0:
            c, d = self.block.support
            return int(math.floor((d - c) / abs(self.b))) + 1
        c, d = (abs(v) for v in self.shifted_support)
        lo, hi = min(c, d), max(c, d)
        return int(math.ceil(math.log(hi / lo) / abs(math.log(self.lam)))) + 1

    def term_scale_width(self, n: int) -> float:
        """Width in x of the region where term n is nonzero (compact blocks)."""
        c, d = self.block.support
        if self.lam == 1.0:
            return d - c
        return (d - c) * self.lam ** (-n)

    def finest_term(self, x_min: float, x_max: float) -> int | None:
        """Index of the finest-scale term that can touch [x_min, x_max] (compact blocks).

        ``None`` means the terms are unbounded (window reaches the fixed point
        and n_range does not cut them off).
        """
        if self.lam == 1.0:
            return 0
        u_lo, u_hi = x_min - self.fixed_point, x_max - self.fixed_point
        c, d = self.shifted_support
        loglam = math.log(self.lam)
        if c > 0:
            near = 0.0 if u_lo <= 0 <= u_hi else (u_lo if u_lo > 0 else math.inf)
        else:
            near = 0.0 if u_lo <= 0 <= u_hi else (-u_hi if u_hi < 0 else math.inf)
        reach = max(abs(c), abs(d))
        if near == math.inf:
            return None if self.n_range is None else (self.n_range[1] if loglam > 0 else self.n_range[0])
        # finest term: largest λ^n allowed, i.e. λ^n |u| <= reach with |u| as small as possible
        if near == 0.0:
            n_f = math.inf if loglam > 0 else -math.inf
        else:
            n_f = math.floor(math.log(reach / near) / loglam) if loglam > 0 else math.ceil(
                math.log(reach / near) / loglam)
        if self.n_range is not None:
            lo, hi = self.n_range
            n_f = min(n_f, hi) if loglam > 0 else max(n_f, lo)
        if math.isinf(n_f):
            return None
        return int(n_f)

    def with_n_range(self, n_range):
        return SelfSimilarPotential(self.block, self.lam, self.b, n_range)

    # evaluation ---------------------------------------------------------

    def _eval_compact(self, x, count=False):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros(flat.shape)
        touched = np.zeros(flat.shape, dtype=np.int64)
        lam, b = self.lam, self.b
        if self.lam == 1.0:
            c, d = self.block.support
            # x + n b in [c, d]
            a0 = (c - flat) / b
            a1 = (d - flat) / b
            n_lo = np.ceil(np.minimum(a0, a1) - 1e-12)
            n_hi = np.floor(np.maximum(a0, a1) + 1e-12)
            loglam = 0.0
        else:
            xs = self.fixed_point
            c, d = self.shifted_support
            u = flat - xs
            loglam = math.log(lam)
            lo_abs, hi_abs = (c, d) if c > 0 else (-d, -c)
            same_side = (u > 0) if c > 0 else (u < 0)
            au = np.where(same_side, np.abs(u), np.nan)
            with np.errstate(divide="ignore", invalid="ignore"):
                t0 = np.log(lo_abs / au) / loglam
                t1 = np.log(hi_abs / au) / loglam
            n_lo = np.ceil(np.fmin(t0, t1) - 1e-12)
            n_hi = np.floor(np.fmax(t0, t1) + 1e-12)
        valid = np.isfinite(n_lo) & np.isfinite(n_hi) & (n_hi >= n_lo)
        if self.n_range is not None:
            n_lo = np.where(valid, np.maximum(n_lo, self.n_range[0]), n_lo)
            n_hi = np.where(valid, np.minimum(n_hi, self.n_range[1]), n_hi)
            valid &= n_hi >= n_lo
        if np.any(valid):
            span = int(np.max(n_hi[valid] - n_lo[valid])) + 1
            for k in range(span):
                n = n_lo + k
                active = valid & (n <= n_hi)
                if not np.any(active):
                    continue
                na = n[active].astype(np.int64)
                if loglam:
                    # x_n = x* + λⁿ (x − x*), the same orbit written around the fixed point
                    # integer powers: exact for λ = 2, and one rounding instead of exp(n log λ)
                    scale = np.power(lam, na.astype(float))
                    xn = self.fixed_point + scale * u[active]
                    weight = scale * scale
                else:
                    xn = flat[active] + na * b
                    weight = 1.0
                out[active] += weight * self.block(xn)
                touched[active] += 1
        out = out.reshape(x.shape)
        if count:
            return out, touched.reshape(x.shape)
        return out

    def _eval_series(self, x):
        x = np.asarray(x, dtype=float)
        if self.lam != 1.0:
            xs = self.fixed_point
            u = x - xs
            near = np.abs(u) < FIXED_POINT_CLAMP
            x = np.where(near, xs + np.where(u < 0, -FIXED_POINT_CLAMP, FIXED_POINT_CLAMP), x)
        lo, hi = self.n_range
        out = np.zeros(x.shape)
        loglam = math.log(self.lam)
        # accumulate from small to large weights
        ns = range(lo, hi + 1)
        ns = sorted(ns, key=lambda n: 2.0 * n * loglam)
        for n in ns:
            out += math.exp(2.0 * n * loglam) * self.block(affine_orbit(x, n, self.lam, self.b))
        return out

    def __call__(self, x):
        if self.block.is_compact:
            return self._eval_compact(x)
        return self._eval_series(x)

    def terms_touched(self, x):
        """Number of series terms the lazy evaluator visits at each x."""
        if not self.block.is_compact:
            lo, hi = self.n_range
            return np.full(np.shape(x), hi - lo + 1)
        return self._eval_compact(x, count=True)[1]

    def truncation_bound(self, x) -> np.ndarray:
        """|λ²V(λx+b) − V(x)| expected from the retained range alone.

        Shifting the index by one drops the n_min term and adds the n_max+1
        term, so for a truncated series the self-similarity defect is exactly
        λ^{2(n_max+1)} U(x_{n_max+1}) − λ^{2 n_min} U(x_{n_min}).
        """
        if self.n_range is None:
            return np.zeros(np.shape(x))
        lo, hi = self.n_range
        x = np.asarray(x, dtype=float)
        lam = self.lam
        top = lam ** (2 * (hi + 1)) * self.block(affine_orbit(x, hi + 1, lam, self.b))
        bottom = lam ** (2 * lo) * self.block(affine_orbit(x, lo, lam, self.b))
        return top - bottom

    def to_dict(self) -> dict:
        return {"block": self.block.to_dict(), "lambda": self.lam, "b": self.b,
                "n_range": list(self.n_range) if self.n_range is not None else None}

    @classmethod
    def from_dict(cls, d: dict):
        allowed = {"block", "lambda", "b", "n_range"}
        extra = set(d) - allowed
        if extra:
            raise ConfigurationError(f"unknown potential keys: {sorted(extra)}")
        nr = d.get("n_range")
        return cls(BuildingBlock.from_dict(d.get("block", {"kind": "compact_bump"})),
                   float(d["lambda"]), float(d.get("b", 0.0)),
                   tuple(nr) if nr is not None else None)


def eval_potential(p: SelfSimilarPotential, x):
    """Evaluate V_{λ,b} at x (scalar or array)."""
    out = p(x)
    return float(out) if np.ndim(out) == 0 else out


def check_self_similarity(p: SelfSimilarPotential, xs, floor: float | None = None) -> float:
    """max |λ² V(λx + b) − V(x)| / (|V(x)| + floor) over the samples.

    For λ = 1 the periodicity defect |V(x + b) − V(x)| is measured instead.
    The default floor is 1e-12 times the largest |V| on the samples.
    """
    xs = np.asarray(xs, dtype=float)
    v = p(xs)
    if p.lam == 1.0:
        shifted = p(xs + p.b)
    else:
        shifted = p.lam ** 2 * p(p.lam * xs + p.b)
    if floor is None:
        floor = 1e-12 * float(np.max(np.abs(v), initial=0.0)) + 1e-300
    dev = np.abs(shifted - v) / (np.abs(v) + floor)
    return float(np.max(dev, initial=0.0))


def load_potential(path) -> SelfSimilarPotential:
    with open(path, encoding="utf-8") as fh:
        return SelfSimilarPotential.from_dict(json.load(fh))


def export_potential_csv(p: SelfSimilarPotential, xs, path) -> Path:
    from .io import write_csv
    xs = np.asarray(xs, dtype=float)
    return write_csv(path, ["x", "V"], np.column_stack([xs, p(xs)]))


def default_potential(lam: float = 1.2, b: float = 1.0, depth: float = -30.0,
                      n_range=None) -> SelfSimilarPotential:
    """Default well: bump of depth ``depth`` on [1, 2]."""
    return SelfSimilarPotential(BuildingBlock.bump(1.0, 2.0, depth), lam, b, n_range)
