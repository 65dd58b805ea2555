"""Scalable orthonormal basis built from translation-orthonormal generators.

A generator χ lives on a lattice of cell length a = |log λ|. The basis
function of scale index n is

    ψ_n(x) = χ(log|x − x*| + n log λ) / √(2 |x − x*|),   x* = b / (1 − λ),

which is even about x*, and obeys ψ_{n+1}(x) = √λ ψ_n(λx + b) identically.
All integrals are carried out in t = log|x − x*|, where ψ_n ψ_m dx becomes
χ(t + n log λ) χ(t + m log λ) dt after folding both sides of x*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConditioningError, ConfigurationError, PreconditionError, SingularityError
from .linalg import HermitianDense, eig_hermitian, quadrature
from .schrodinger import WannierFunction

GENERATOR_KINDS = ("sinc", "lowdin_gaussian", "numeric_wannier")
CONDITION_FLOOR = 1e-6
SINGULAR_RADIUS = 1e-12
DEFAULT_WIDTH = 0.3


@dataclass(frozen=True, eq=False)
class GeneratorFunction:
    """Shift-orthonormal function χ on a lattice of cell length ``cell_length``.

    ``center`` is the offset (in units of the cell) of the home cell's weight.
    For ``lowdin_gaussian`` the function is Σ_j c_j exp(−(t − (j + center) a)² / 2σ²)
    with σ = width·a; ``alpha`` is the exponential decay rate per unit t.
    """

    kind: str
    cell_length: float
    band_index: int = 0
    center: float = 0.0
    width: float | None = None
    coefficients: np.ndarray | None = field(default=None, repr=False)
    alpha: float | None = None
    smallest_overlap_eigenvalue: float | None = None
    tabulation: tuple | None = field(default=None, repr=False)
    _spline: object = field(default=None, repr=False, compare=False)

    @property
    def decay_class(self) -> str:
        return "strong" if self.kind == "lowdin_gaussian" else "tempered"

    @property
    def support_radius(self) -> float:
        """Distance from the home cell beyond which |χ| is below roundoff (inf if tempered)."""
        a = self.cell_length
        if self.kind == "lowdin_gaussian":
            m = (self.coefficients.size - 1) // 2
            return (m + 1) * a + 10.0 * self.width * a
        if self.kind == "numeric_wannier":
            x = self.tabulation[0]
            return float(max(abs(x[0]), abs(x[-1]))) + a
        return math.inf

    def _lowdin_terms(self, t):
        a = self.cell_length
        m = (self.coefficients.size - 1) // 2
        sig = self.width * a
        centers = (np.arange(-m, m + 1) + self.center) * a
        z = (np.asarray(t, dtype=float)[..., None] - centers) / sig
        g = np.exp(-0.5 * z * z)
        return z, g, sig

    def __call__(self, t):
        """χ(t)."""
        t = np.asarray(t, dtype=float)
        a = self.cell_length
        if self.kind == "sinc":
            return np.sinc(t / a - self.center) / math.sqrt(a)
        if self.kind == "lowdin_gaussian":
            _, g, _ = self._lowdin_terms(t)
            return g @ self.coefficients
        xs = self.tabulation[0]
        out = np.zeros_like(t)
        inside = (t >= xs[0]) & (t <= xs[-1])
        out[inside] = self._spline(t[inside])
        return out

    def derivative(self, t):
        """dχ/dt."""
        t = np.asarray(t, dtype=float)
        a = self.cell_length
        if self.kind == "sinc":
            y = math.pi * (t / a - self.center)
            small = np.abs(y) < 1e-4
            ys = np.where(small, 1.0, y)
            d = np.where(small, -y / 3.0, (np.cos(ys) * ys - np.sin(ys)) / (ys * ys))
            return d * (math.pi / a) / math.sqrt(a)
        if self.kind == "lowdin_gaussian":
            z, g, sig = self._lowdin_terms(t)
            return (-z * g / sig) @ self.coefficients
        xs = self.tabulation[0]
        out = np.zeros_like(t)
        inside = (t >= xs[0]) & (t <= xs[-1])
        out[inside] = self._spline(t[inside], 1)
        return out

    def tail_mass(self, distance: float) -> float:
        """Upper bound on ∫|χ|² beyond ``distance`` from the home cell (one side)."""
        a = self.cell_length
        if distance <= 0:
            return 1.0
        if self.kind == "sinc":
            # ∫_d^∞ sin²(πt/a)/(π t/a)² dt/a ≤ a/(π² d)
            return a / (math.pi ** 2 * distance)
        if self.kind == "lowdin_gaussian":
            m = (self.coefficients.size - 1) // 2
            sig = self.width * a
            j = np.arange(-m, m + 1)
            far = np.abs(j + self.center) * a >= distance - 8.0 * sig
            amp = np.sum(np.abs(self.coefficients[far]))
            return float(amp * amp * math.sqrt(math.pi) * sig + math.exp(-32.0))
        xs, ys = self.tabulation
        h = xs[1] - xs[0]
        far = np.abs(xs) >= distance
        return float(np.sum(ys[far] ** 2) * h)


def _lowdin_coefficients(width: float, n_sites: int):
    """Central column of S^{-1/2} for unit-lattice Gaussians of standard deviation ``width``."""
    m = (n_sites - 1) // 2
    d = np.arange(-m, m + 1)
    diff = d[:, None] - d[None, :]
    # ∫ exp(−(t−i)²/2w²) exp(−(t−j)²/2w²) dt = √π w exp(−(i−j)²/4w²)
    s = math.sqrt(math.pi) * width * np.exp(-(diff * diff) / (4.0 * width * width))
    dec = eig_hermitian(HermitianDense(s))
    smallest = float(dec.values[0] / (math.sqrt(math.pi) * width))
    if smallest < CONDITION_FLOOR:
        raise ConditioningError(
            f"Gaussian overlap matrix is near singular (smallest normalized eigenvalue {smallest:.3e}); "
            "reduce the width below the lattice constant", smallest_eigenvalue=smallest)
    v = np.real(dec.vectors)
    inv_sqrt = (v * (1.0 / np.sqrt(dec.values))) @ v.T
    return inv_sqrt[:, m].copy(), smallest


def make_generator(kind: str, cell_length: float = 1.0, *, width: float = DEFAULT_WIDTH,
                   center: float | None = None, n_sites: int = 41, band_index: int = 0,
                   wannier: WannierFunction | None = None, x=None, values=None) -> GeneratorFunction:
    """Construct a generator of the given kind on a lattice of length ``cell_length``.

    sinc: χ(t) = sinc(t/a − center)/√a (center defaults to 0).
    lowdin_gaussian: symmetric orthonormalization of ``n_sites`` Gaussian
        translates; ``width`` is σ in units of a, ``center`` defaults to 1/2
        so the home cell is [0, a].
    numeric_wannier: a tabulated Wannier function (from ``wannier`` or raw
        ``x``/``values`` samples) rescaled from its own period to ``a``.
    """
    if kind not in GENERATOR_KINDS:
        raise ConfigurationError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")
    a = float(cell_length)
    if not (math.isfinite(a) and a > 0):
        raise ConfigurationError("cell_length must be positive")
    if kind == "sinc":
        return GeneratorFunction("sinc", a, band_index, 0.0 if center is None else float(center))
    if kind == "lowdin_gaussian":
        if not width > 0:
            raise ConfigurationError("width must be positive")
        if n_sites < 3 or n_sites % 2 == 0:
            raise ConfigurationError("n_sites must be odd and at least 3")
        coef, smallest = _lowdin_coefficients(float(width), int(n_sites))
        coef = coef / math.sqrt(a)
        # branch point of the inverse-square-root symbol sits at Im θ = 1/(4 w²)
        alpha = 1.0 / (4.0 * width * width * a)
        return GeneratorFunction("lowdin_gaussian", a, band_index, 0.5 if center is None else float(center),
                                 float(width), coef, alpha, smallest)
    if wannier is not None:
        vals = np.asarray(wannier.values)
        if np.max(np.abs(vals.imag), initial=0.0) > 1e-6 * max(np.max(np.abs(vals)), 1e-300):
            raise PreconditionError("Wannier function is not real in this gauge")
        src_x = np.asarray(wannier.x, dtype=float)
        src_y = vals.real.astype(float)
        src_len = wannier.cell_length
        band_index = wannier.band
    else:
        if x is None or values is None:
            raise ConfigurationError("numeric_wannier needs a WannierFunction or x/values samples")
        src_x = np.asarray(x, dtype=float)
        src_y = np.asarray(values, dtype=float)
        src_len = a
    if src_x.size < 4 or np.any(np.diff(src_x) <= 0):
        raise ConfigurationError("tabulation abscissae must be increasing with at least 4 samples")
    scale = a / src_len
    c = 0.0 if center is None else float(center)
    tx = src_x * scale + c * a
    ty = src_y / math.sqrt(scale)
    return GeneratorFunction("numeric_wannier", a, band_index, c, tabulation=(tx, ty),
                             _spline=CubicSpline(tx, ty))


def shift_overlap(gen: GeneratorFunction, shift: int, tol: float = 1e-13, radius: float | None = None) -> float:
    """∫ χ(t) χ(t − shift·a) dt by adaptive quadrature."""
    a = gen.cell_length
    if radius is None:
        radius = gen.support_radius if math.isfinite(gen.support_radius) else 2000.0 * a
    lo = min(0.0, shift * a) + gen.center * a - radius
    hi = max(0.0, shift * a) + gen.center * a + radius
    edges = np.arange(math.floor(lo / a), math.ceil(hi / a) + 1) * a
    r = quadrature(lambda t: gen(t) * gen(t - shift * a), lo, hi, tol=tol, breakpoints=edges[1:-1])
    return float(r.value)


# basis functions ------------------------------------------------------------


@dataclass(frozen=True)
class ScalableBasisFunction:
    generator: GeneratorFunction
    n: int
    lam: float
    b: float = 0.0

    def __post_init__(self):
        if not (self.lam > 0 and self.lam != 1.0):
            raise ConfigurationError("lambda must be positive and different from 1")
        a = abs(math.log(self.lam))
        if abs(self.generator.cell_length - a) > 1e-12 * a:
            raise ConfigurationError(
                f"generator cell length {self.generator.cell_length} must equal |log lambda| = {a}")

    @property
    def fixed_point(self) -> float:
        return self.b / (1.0 - self.lam)

    @property
    def shift(self) -> float:
        """Argument offset n log λ applied to log|x − x*|."""
        return self.n * math.log(self.lam)

    def __call__(self, x):
        return eval_psi(self, x)

    def in_t(self, t):
        """χ(t + n log λ), the folded amplitude in the logarithmic variable."""
        return self.generator(np.asarray(t) + self.shift)

    def localization_interval(self) -> tuple[float, float]:
        """|x − x*| range covered by the generator's home cell [c a − a/2, c a + a/2]."""
        a = self.generator.cell_length
        c = self.generator.center * a
        return (math.exp(c - 0.5 * a - self.shift), math.exp(c + 0.5 * a - self.shift))


def eval_psi(f: ScalableBasisFunction, x):
    """ψ_n(x) = χ(log|x − x*| + n log λ)/√(2|x − x*|)."""
    x = np.asarray(x, dtype=float)
    u = np.abs(x - f.fixed_point)
    if np.any(u < SINGULAR_RADIUS):
        raise SingularityError("psi evaluated within 1e-12 of the fixed point")
    out = f.generator(np.log(u) + f.shift) / np.sqrt(2.0 * u)
    return out if out.ndim else float(out)


def basis_family(gen: GeneratorFunction, lam: float, b: float, ns) -> list[ScalableBasisFunction]:
    return [ScalableBasisFunction(gen, int(n), lam, b) for n in ns]


def mass_in_interval(f: ScalableBasisFunction, lo: float, hi: float, tol: float = 1e-12) -> float:
    """L² mass of ψ in lo < |x − x*| < hi (both sides of the fixed point)."""
    if not 0 < lo < hi:
        raise PreconditionError("need 0 < lo < hi")
    t0, t1 = math.log(lo), math.log(hi)
    return float(quadrature(lambda t: f.in_t(t) ** 2, t0, t1, tol=tol).value)


# orthonormality ------------------------------------------------------------


@dataclass
class OrthonormalityReport:
    gram: np.ndarray
    deviation: float
    log_puncture: float          # log δ, the puncture radius around x*
    log_outer: float             # log of the outer integration radius
    neglected_mass_bound: float
    quadrature_error: float


def check_orthonormality(family: list[ScalableBasisFunction], quad_tol: float = 1e-10,
                         log_puncture: float | None = None, log_outer: float | None = None,
                         radius: float | None = None) -> OrthonormalityReport:
    """Gram matrix of a family over δ < |x − x*| < R, computed in t = log|x − x*|.

    The default puncture is δ = 1e−8 λ^{n_min}; for tempered generators the
    window is widened to ``radius`` (default 5000 cells) around the family.
    The neglected mass is bounded through the generator's tail estimate.
    """
    if not family:
        raise PreconditionError("empty family")
    gen = family[0].generator
    lam, b = family[0].lam, family[0].b
    for f in family:
        if f.lam != lam or f.b != b:
            raise PreconditionError("family members must share lambda and b")
    a = gen.cell_length
    shifts = np.array([f.shift for f in family])
    c = gen.center * a
    cell_lo = c - float(np.max(shifts))
    cell_hi = c - float(np.min(shifts))
    n_min = min(f.n for f in family)
    if log_puncture is None:
        log_puncture = math.log(1e-8) + n_min * math.log(lam)
    if log_outer is None:
        rad = gen.support_radius if math.isfinite(gen.support_radius) else (radius or 5000.0 * a)
        log_outer = cell_hi + rad
        if not math.isfinite(gen.support_radius):
            log_puncture = min(log_puncture, cell_lo - rad)
    if log_puncture >= cell_lo or log_outer <= cell_hi:
        raise PreconditionError("integration window does not cover every member's home cell")
    neglected = max(gen.tail_mass(cell_lo - log_puncture), gen.tail_mass(log_outer - cell_hi))
    k = len(family)
    iu = np.triu_indices(k)

    def integrand(t):
        vals = np.stack([f.in_t(t) for f in family], axis=-1)
        return vals[:, iu[0]] * vals[:, iu[1]]

    edges = np.arange(math.ceil(log_puncture / a), math.floor(log_outer / a) + 1) * a
    res = quadrature(integrand, log_puncture, log_outer, tol=quad_tol, breakpoints=edges,
                     max_subdivisions=400_000)
    gram = np.zeros((k, k))
    gram[iu] = res.value
    gram = gram + np.triu(gram, 1).T
    dev = float(np.max(np.abs(gram - np.eye(k))))
    return OrthonormalityReport(gram, dev, float(log_puncture), float(log_outer), float(neglected), res.error)


# localization --------------------------------------------------------------


@dataclass
class LocalizationReport:
    decay_class: str
    alpha: float | None
    exponent_far: float          # |ψ| ~ |x − x*|^(−p) as |x − x*| → ∞
    exponent_near: float         # |ψ| ~ |x − x*|^(+q) as x → x*
    functional_far: np.ndarray
    functional_near: np.ndarray
    monotone_far: bool
    monotone_near: bool
    passed: bool


def _cell_envelope(f: ScalableBasisFunction, t_cells: np.ndarray, samples: int = 64):
    """Per-cell maxima of |ψ| (with the |u| where attained) and of |χ|.

    Cells are centered on ``t_cells``; χ is returned too because roundoff
    floors are set on the generator, before the 1/√(2|u|) factor amplifies
    them near the fixed point.
    """
    a = f.generator.cell_length
    off = np.linspace(-0.5 * a, 0.5 * a, samples, endpoint=False)
    t = t_cells[:, None] + off[None, :]
    u = np.exp(t)
    chi = np.abs(f.generator(t + f.shift))
    psi = chi / np.sqrt(2.0 * u)
    j = np.argmax(psi, axis=1)
    rows = np.arange(t.shape[0])
    return u[rows, j], psi[rows, j], np.max(chi, axis=1)


def _decreasing_tail(vals, rel_floor=1e-14):
    """True if the sequence is non-increasing after its maximum, up to roundoff."""
    if vals.size == 0 or np.max(vals) == 0:
        return True
    k = int(np.argmax(vals))
    tail = vals[k:]
    floor = rel_floor * vals[k]
    return bool(np.all(np.diff(tail) <= floor))


def check_localization(f: ScalableBasisFunction, n_cells: int = 40, fit_floor: float = 1e-12) -> LocalizationReport:
    """Decay of ψ towards infinity and towards the fixed point.

    Strong (exponentially decaying) generators are tested with the
    functional |u|^{α+1/2} ψ, tempered ones with √(|u| |log|u||) ψ, where
    u = x − x*. The decay exponents come from a log-log regression of the
    per-cell envelope over the range where it sits above ``fit_floor``.
    """
    gen = f.generator
    a = gen.cell_length
    home = gen.center * a - f.shift
    far_cells = home + a * np.arange(1, n_cells + 1)
    near_cells = home - a * np.arange(1, n_cells + 1)
    u_far, e_far, c_far = _cell_envelope(f, far_cells)
    u_near, e_near, c_near = _cell_envelope(f, near_cells)
    if gen.decay_class == "strong":
        w_far = u_far ** (gen.alpha + 0.5)
        w_near = u_near ** (gen.alpha + 0.5)
    else:
        w_far = np.sqrt(u_far * np.abs(np.log(u_far)))
        w_near = np.sqrt(u_near * np.abs(np.log(u_near)))
    fun_far = w_far * e_far
    fun_near = w_near * e_near
    peak = float(np.max(np.abs(gen(home + np.linspace(-a, a, 257) + f.shift))))
    # below the floor the generator samples are roundoff and carry no decay information
    keep_far = c_far > fit_floor * peak
    keep_near = c_near > fit_floor * peak

    def fit(u, e, keep):
        if np.count_nonzero(keep) < 3:
            return math.inf
        return float(np.polyfit(np.log(u[keep]), np.log(e[keep]), 1)[0])

    p_far = -fit(u_far, e_far, keep_far)
    q_near = fit(u_near, e_near, keep_near)
    mono_far = _decreasing_tail(fun_far[keep_far])
    mono_near = _decreasing_tail(fun_near[keep_near])
    passed = mono_far and mono_near
    if gen.decay_class == "strong" and peak > 0:
        passed = passed and p_far >= gen.alpha + 0.5 - 0.1 and q_near >= gen.alpha - 0.5 - 0.1
    return LocalizationReport(gen.decay_class, gen.alpha, p_far, q_near, fun_far, fun_near,
                              mono_far, mono_near, bool(passed))


def tabulate(f: ScalableBasisFunction, xs) -> list[tuple[float, float]]:
    """(x, ψ) rows, skipping points at the fixed point."""
    xs = np.asarray(xs, dtype=float)
    keep = np.abs(xs - f.fixed_point) >= SINGULAR_RADIUS
    return list(zip(xs[keep].tolist(), np.atleast_1d(eval_psi(f, xs[keep])).tolist()))


def recursion_residual(f: ScalableBasisFunction, xs) -> float:
    """max |ψ_{n+1}(x) − √λ ψ_n(λx + b)| over ``xs``, relative to max |ψ_{n+1}|."""
    xs = np.asarray(xs, dtype=float)
    nxt = ScalableBasisFunction(f.generator, f.n + 1, f.lam, f.b)
    lhs = eval_psi(nxt, xs)
    rhs = math.sqrt(f.lam) * eval_psi(f, f.lam * xs + f.b)
    scale = max(float(np.max(np.abs(lhs))), 1e-300)
    return float(np.max(np.abs(lhs - rhs)) / scale)
