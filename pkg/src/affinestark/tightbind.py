"""Tight-binding reduction of a self-similar Hamiltonian in the scalable basis.

Matrix elements ⟨n,k|H|m,q⟩ are integrated in t = log|x − x*|, where the
kinetic term becomes (1/2m) ∫ e^{−2t} (χ_n' − χ_n/2)(χ_m' − χ_m/2) dt and the
potential term ∫ χ_n χ_m ½[V(x* + e^t) + V(x* − e^t)] dt. The affine symmetry
makes ⟨n,k|H|m,q⟩ = λ^{n+m} H_{n−m}^{k,q}, so the whole operator is
H = λ^N H₀ λ^N with H₀ = Σ_s T^s H_s, N the number and T the shift operator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, ScalingViolationWarning
from .ladder import LadderDecomposition, detect_ladders
from .linalg import EigenDecomposition, HermitianDense, eig_hermitian, quadrature
from .potential import SelfSimilarPotential
from .scalebasis import GeneratorFunction, ScalableBasisFunction, make_generator
from .schrodinger import DEFAULT_MASS

EDGE_SITES = 3
EDGE_MASS = 1e-6
TB_WIDTH = 0.3


def well_center(p: SelfSimilarPotential) -> float:
    """Position of the building block's midpoint on the log lattice, as a cell fraction.

    Placing the generator there puts one basis function on each copy of the
    well instead of splitting every copy between two neighbours.
    """
    a = abs(math.log(p.lam))
    if p.block.kind == "compact_bump":
        c, d = p.block.support
        mid = 0.5 * (c + d)
    elif p.block.kind == "custom_table":
        xs = p.block.params["xs"]
        mid = 0.5 * (xs[0] + xs[-1])
    else:
        return 0.5
    u = abs(mid - p.fixed_point)
    if u == 0:
        return 0.5
    return (math.log(u) / a) % 1.0


def default_generator(p: SelfSimilarPotential, width: float = TB_WIDTH, n_sites: int = 41) -> GeneratorFunction:
    """Löwdin-Gaussian generator on the log lattice of ``p``, centered on the wells."""
    return make_generator("lowdin_gaussian", abs(math.log(p.lam)), width=width,
                          center=well_center(p), n_sites=n_sites)


@dataclass
class TBMatrixElements:
    """Couplings H_s (band matrices) plus the raw elements they were averaged from."""

    lam: float
    bands: list[int]
    H: dict                                  # s -> (n_bands, n_bands) complex array
    raw: dict = field(default_factory=dict)  # (n, k, m, q) -> complex
    errors: dict = field(default_factory=dict)
    spread: dict = field(default_factory=dict)
    quad_tol: float = 0.0

    @classmethod
    def from_couplings(cls, lam: float, couplings: dict, n_bands: int = 1) -> "TBMatrixElements":
        """Elements given directly as {s: H_s}; scalars are promoted to 1×1 blocks."""
        H = {}
        for s, v in couplings.items():
            H[int(s)] = np.atleast_2d(np.asarray(v, dtype=complex)).reshape(n_bands, n_bands)
        return cls(lam, list(range(n_bands)), H)

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    @property
    def s_max(self) -> int:
        return max((abs(s) for s in self.H), default=0)

    def coupling(self, s: int) -> np.ndarray:
        return self.H.get(int(s), np.zeros((self.n_bands, self.n_bands), dtype=complex))

    def magnitude(self, s: int) -> float:
        return float(np.max(np.abs(self.coupling(s))))

    def dropped_weight(self, s_max: int) -> float:
        """Σ_{|s| > s_max} max|H_s|, the coupling weight a truncated operator ignores."""
        return float(sum(self.magnitude(s) for s in self.H if abs(s) > s_max))

    def hermiticity_residual(self) -> float:
        out = 0.0
        for (n, k, m, q), v in self.raw.items():
            w = self.raw.get((m, q, n, k))
            if w is not None:
                out = max(out, abs(v - np.conj(w)))
        return out

    def covariance_residuals(self) -> list[tuple[tuple, float, float]]:
        """(key, |raw(n,m) − λ^{2m} raw(n−m,0)|, combined tolerance) for every available pair."""
        out = []
        for (n, k, m, q), v in self.raw.items():
            ref = self.raw.get((n - m, k, 0, q))
            if ref is None or m == 0:
                continue
            f = self.lam ** (2 * m)
            tol = self.errors[(n, k, m, q)] + f * self.errors[(n - m, k, 0, q)]
            out.append(((n, k, m, q), float(abs(v - f * ref)), float(tol)))
        return out

    def rows(self):
        """(s, k, q, re, im) rows for CSV export."""
        out = []
        for s in sorted(self.H):
            blk = self.H[s]
            for i, k in enumerate(self.bands):
                for j, q in enumerate(self.bands):
                    out.append((s, k, j if q is None else q, blk[i, j].real, blk[i, j].imag))
        return out


def _potential_in_t(p: SelfSimilarPotential):
    xs = p.fixed_point

    def f(t):
        u = np.exp(t)
        return 0.5 * (p(xs + u) + p(xs - u))

    return f


def _support_breaks(p: SelfSimilarPotential, t_lo: float, t_hi: float) -> np.ndarray:
    """log|x − x*| positions of the term support edges inside [t_lo, t_hi]."""
    if not p.block.is_compact or p.lam == 1.0:
        return np.empty(0)
    c, d = p.shifted_support
    a = math.log(p.lam)
    out = []
    for edge in (c, d):
        if edge == 0:
            continue
        base = math.log(abs(edge))
        # term k sits at log|edge| − k log λ
        k_lo = math.floor(min((base - t_hi) / a, (base - t_lo) / a)) - 1
        k_hi = math.ceil(max((base - t_hi) / a, (base - t_lo) / a)) + 1
        for k in range(k_lo, k_hi + 1):
            t = base - k * a
            if t_lo < t < t_hi:
                out.append(t)
    return np.unique(np.array(out))


def _effective_window(gen: GeneratorFunction, floor: float = 1e-18) -> tuple[float, float]:
    """t range outside which the generator is below ``floor`` relative to its peak."""
    a = gen.cell_length
    if gen.kind == "lowdin_gaussian":
        c = np.abs(gen.coefficients)
        m = (c.size - 1) // 2
        idx = np.nonzero(c > floor * c.max())[0]
        lo = (idx[0] - m + gen.center) * a - 8.0 * gen.width * a
        hi = (idx[-1] - m + gen.center) * a + 8.0 * gen.width * a
        return lo, hi
    if gen.kind == "numeric_wannier":
        x = gen.tabulation[0]
        return float(x[0]), float(x[-1])
    raise PreconditionError("matrix elements need a generator with finite kinetic energy "
                            "(the sinc generator's tempered tails make it diverge at the fixed point)")


def compute_matrix_elements(p: SelfSimilarPotential, generators, n_window=(-3, 3),
                            quad_tol: float = 1e-10, mass: float = DEFAULT_MASS,
                            spread_factor: float = 10.0) -> TBMatrixElements:
    """Raw elements ⟨n,k|H|m,q⟩ for n, m in ``n_window`` and the extracted H_s.

    ``generators`` is one GeneratorFunction per band (cell length |log λ|).
    Each raw element is integrated to absolute tolerance quad_tol·λ^{n+m}, so
    the rescaled H_s share the tolerance quad_tol. A ScalingViolationWarning is
    raised when the spread of λ^{−(n+m)}⟨n,k|H|m,q⟩ along a diagonal exceeds
    ``spread_factor``·quad_tol.
    """
    if isinstance(generators, GeneratorFunction):
        generators = [generators]
    if p.lam == 1.0:
        raise PreconditionError("matrix elements need lambda != 1")
    n_lo, n_hi = int(n_window[0]), int(n_window[1])
    if n_hi < n_lo:
        raise PreconditionError("empty n window")
    lam = p.lam
    loglam = math.log(lam)
    bands = list(range(len(generators)))
    funcs = {(n, k): ScalableBasisFunction(g, n, lam, p.b) for k, g in enumerate(generators)
             for n in range(n_lo, n_hi + 1)}
    windows = {key: tuple(w - f.shift for w in _effective_window(f.generator)) for key, f in funcs.items()}
    vt = _potential_in_t(p)
    kin = 0.5 / mass
    raw, errs = {}, {}
    for (n, k), fn in funcs.items():
        for (m, q), fm in funcs.items():
            if (m, q) < (n, k):
                continue
            lo = max(windows[(n, k)][0], windows[(m, q)][0])
            hi = min(windows[(n, k)][1], windows[(m, q)][1])
            tol = quad_tol * lam ** (n + m)
            if hi <= lo:
                val, err = 0.0, 0.0
            else:
                def integrand(t, fn=fn, fm=fm):
                    cn, cm = fn.in_t(t), fm.in_t(t)
                    dn = fn.generator.derivative(t + fn.shift) - 0.5 * cn
                    dm = fm.generator.derivative(t + fm.shift) - 0.5 * cm
                    return kin * np.exp(-2.0 * t) * dn * dm + cn * cm * vt(t)

                a = fn.generator.cell_length
                cells = np.arange(math.ceil(lo / a), math.floor(hi / a) + 1) * a
                brk = np.concatenate([cells, _support_breaks(p, lo, hi)])
                r = quadrature(integrand, lo, hi, tol=tol, order=12, breakpoints=np.sort(brk),
                               max_subdivisions=100_000)
                val, err = float(r.value), max(r.error, 0.0)
            raw[(n, k, m, q)] = complex(val)
            raw[(m, q, n, k)] = complex(val)
            errs[(n, k, m, q)] = errs[(m, q, n, k)] = max(err, tol)
    H, spread = {}, {}
    nb = len(bands)
    worst = None
    for s in range(n_lo - n_hi, n_hi - n_lo + 1):
        blk = np.zeros((nb, nb), dtype=complex)
        spr = 0.0
        for k in bands:
            for q in bands:
                vals = []
                keys = []
                for m in range(n_lo, n_hi + 1):
                    n = m + s
                    if n_lo <= n <= n_hi:
                        vals.append(raw[(n, k, m, q)] * lam ** (-(n + m)))
                        keys.append((n, k, m, q))
                vals = np.array(vals)
                blk[k, q] = vals.mean()
                dev = np.abs(vals - vals.mean())
                if dev.size and dev.max() > spr:
                    spr = float(dev.max())
                    if worst is None or spr > worst[0]:
                        worst = (spr, keys[int(np.argmax(dev))])
        H[s] = blk
        spread[s] = spr
    tb = TBMatrixElements(lam, bands, H, raw, errs, spread, quad_tol)
    if worst is not None and worst[0] > spread_factor * quad_tol:
        warnings.warn(ScalingViolationWarning(
            f"diagonal spread {worst[0]:.3e} exceeds {spread_factor:g} x quad_tol at pair {worst[1]}"),
            stacklevel=2)
    return tb


# lattice operators ----------------------------------------------------------


@dataclass
class LatticeOperator:
    """Truncation of H = λ^N H₀ λ^N, H₀ = Σ_{|s| ≤ s_max} T^s H_s, on sites −M..M."""

    lam: float
    dimension: int
    couplings: dict
    n_bands: int = 1

    @property
    def half(self) -> int:
        return (self.dimension - 1) // 2

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1)

    @property
    def N(self) -> np.ndarray:
        return np.diag(self.sites.astype(float))

    @property
    def T(self) -> np.ndarray:
        """Truncated shift, T|n⟩ = |n+1⟩ (the top site is sent to zero)."""
        return np.eye(self.dimension, k=-1)

    @property
    def s_max(self) -> int:
        return max((abs(s) for s in self.couplings), default=0)

    def materialize(self) -> HermitianDense:
        """Dense matrix with block (n, m) equal to λ^{n+m} H_{n−m} (n-major, band-minor)."""
        d, nb = self.dimension, self.n_bands
        n = self.sites
        out = np.zeros((d * nb, d * nb), dtype=complex)
        scale = self.lam ** n.astype(float)
        for s, blk in self.couplings.items():
            for i in range(max(0, s), min(d, d + s)):
                j = i - s
                w = scale[i] * scale[j]
                out[i * nb:(i + 1) * nb, j * nb:(j + 1) * nb] = w * blk
        if not np.any(out.imag):
            out = out.real
        return HermitianDense(out)


def build_lattice_operator(tb: TBMatrixElements, truncation: int, s_max: int = 3) -> LatticeOperator:
    """Lattice operator of odd size ``truncation`` keeping couplings |s| ≤ s_max."""
    s_max = min(int(s_max), tb.s_max)
    if truncation < 2 * s_max + 3:
        raise PreconditionError(f"truncation must be at least 2*s_max + 3 = {2 * s_max + 3}")
    if truncation % 2 == 0:
        raise PreconditionError("truncation must be odd so that N is centered on 0")
    cpl = {s: tb.coupling(s) for s in range(-s_max, s_max + 1) if s in tb.H}
    return LatticeOperator(tb.lam, int(truncation), cpl, tb.n_bands)


def commutation_residual(op: LatticeOperator, interior: float = 1.0 / 3.0) -> float:
    """‖T H − λ^{−2} H T‖ on the central fraction of sites, divided by ‖H‖ (Frobenius)."""
    H = op.materialize().entries
    nb = op.n_bands
    T = np.kron(op.T, np.eye(nb))
    R = T @ H - op.lam ** -2 * H @ T
    d = op.dimension
    lo = int(round(d * (1 - interior) / 2))
    hi = d - lo
    sl = slice(lo * nb, hi * nb)
    return float(np.linalg.norm(R[sl, sl]) / np.linalg.norm(H))


@dataclass
class LatticeSpectrum:
    values: np.ndarray
    edge: np.ndarray
    decomposition: EigenDecomposition
    ladders: dict           # "positive"/"negative" -> LadderDecomposition

    @property
    def interior(self) -> np.ndarray:
        return self.values[~self.edge]


def spectrum_from_lattice(op: LatticeOperator, tol: float = 1e-3,
                          edge_sites: int = EDGE_SITES, edge_mass: float = EDGE_MASS) -> LatticeSpectrum:
    """Eigenvalues of the materialized operator with edge flags and ladder grouping."""
    dec = eig_hermitian(op.materialize(), want_vectors=True)
    nb = op.n_bands
    v = np.abs(dec.vectors) ** 2
    k = edge_sites * nb
    mass = v[:k].sum(axis=0) + v[-k:].sum(axis=0)
    edge = mass > edge_mass
    ladders = {}
    for name, sign in (("positive", 1), ("negative", -1)):
        ladders[name] = detect_ladders(dec.values, op.lam, tol, sign, trusted=~edge,
                                       reasons=["edge" if e else "" for e in edge])
    return LatticeSpectrum(dec.values, edge, dec, ladders)


def interior_ratios(ls: LatticeSpectrum, sign: int = 1) -> np.ndarray:
    """E_{i+1}/E_i for consecutive rungs of every ladder in one sign class."""
    dec: LadderDecomposition = ls.ladders["positive" if sign > 0 else "negative"]
    out = [L.ratios() for L in dec.ladders]
    return np.concatenate(out) if out else np.empty(0)


# coefficient constraints -----------------------------------------------------


@dataclass
class ConstraintReport:
    max_violation: float
    worst_shift: int
    gram: np.ndarray


def coefficient_constraints_check(coeffs, j_min: int | None = None, max_shift: int | None = None) -> ConstraintReport:
    """Convolution orthonormality Σ_j U_j^{k,k'} conj(U_{j+d}^{q,k'}) = δ_{kq} δ_{d0}.

    ``coeffs`` is an array over j (shape (n_j,) for one band or (n_j, K, K)),
    or a dict {j: value}. Shifts d up to ``max_shift`` (default n_j − 1) are tested.
    """
    if isinstance(coeffs, dict):
        js = sorted(coeffs)
        j_min = js[0]
        first = np.atleast_2d(np.asarray(coeffs[js[0]], dtype=complex))
        arr = np.zeros((js[-1] - j_min + 1,) + first.shape, dtype=complex)
        for j, v in coeffs.items():
            arr[j - j_min] = np.atleast_2d(np.asarray(v, dtype=complex))
    else:
        arr = np.asarray(coeffs, dtype=complex)
        if arr.ndim == 1:
            arr = arr[:, None, None]
    nj, K = arr.shape[0], arr.shape[1]
    max_shift = nj - 1 if max_shift is None else int(max_shift)
    worst, worst_d = 0.0, 0
    gram0 = None
    for d in range(0, max_shift + 1):
        a = arr[: nj - d] if d else arr
        b = arr[d:]
        # G[k, q] = Σ_j Σ_k' U_j[k, k'] conj(U_{j+d}[q, k'])
        g = np.einsum("jab,jcb->ac", a, np.conj(b))
        target = np.eye(K) if d == 0 else np.zeros((K, K))
        viol = float(np.max(np.abs(g - target)))
        if d == 0:
            gram0 = g
        if viol > worst:
            worst, worst_d = viol, d
    return ConstraintReport(worst, worst_d, gram0)
