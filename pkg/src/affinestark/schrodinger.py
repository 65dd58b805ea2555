"""Finite-difference Schrödinger operators, spectra, and periodic (Bloch) bands.

Units: ħ = 1 and, by default, m = 1/2 so that H = −d²/dx² + V.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GaugeError, InvalidInputError, PreconditionError, ResolutionError
from .linalg import HermitianDense, SymTridiagonal, eig_hermitian, eig_sym_tridiagonal
from .potential import BuildingBlock, SelfSimilarPotential

DEFAULT_MASS = 0.5
EDGE_FRACTION = 0.05
EDGE_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if int(self.n_points) < 3:
            raise InvalidInputError("grid needs at least 3 points")
        if not self.x_max > self.x_min:
            raise InvalidInputError("grid needs x_max > x_min")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)


@dataclass
class Eigenpair:
    """Energy with its grid wavefunction (Σ ψ² h = 1).

    ``edge_flag`` marks states with non-negligible mass next to the Dirichlet
    walls; ``core_flag`` marks states reaching into the region around the
    fixed point where the retained series was cut off.
    """

    energy: float
    wavefunction: np.ndarray
    grid: Grid
    edge_flag: bool = False
    core_flag: bool = False
    index: int = -1

    @property
    def trusted(self) -> bool:
        return not (self.edge_flag or self.core_flag)


def resolved_n_max(p: SelfSimilarPotential, g: Grid, cells: float = 8.0) -> int:
    """Finest term index whose support still spans ``cells`` grid spacings."""
    c, d = p.block.support
    loglam = math.log(p.lam)
    # (d − c) λ^{−n} >= cells h
    val = math.log((d - c) / (cells * g.spacing)) / loglam
    return int(math.floor(val)) if loglam > 0 else int(math.ceil(val))


def potential_for_grid(p: SelfSimilarPotential, g: Grid, cells: float = 8.0) -> SelfSimilarPotential:
    """Truncate the series so that every retained term is resolved on ``g``."""
    if p.lam == 1.0 or not p.block.is_compact:
        return p
    n_f = resolved_n_max(p, g, cells)
    if p.lam > 1:
        lo = p.n_range[0] if p.n_range else -10_000
        hi = min(n_f, p.n_range[1]) if p.n_range else n_f
    else:
        lo = max(n_f, p.n_range[0]) if p.n_range else n_f
        hi = p.n_range[1] if p.n_range else 10_000
    return p.with_n_range((lo, hi))


def assemble_hamiltonian(p, g: Grid, mass: float = DEFAULT_MASS) -> SymTridiagonal:
    """Second-order finite-difference H on ``g`` with Dirichlet walls.

    ``p`` is a SelfSimilarPotential (checked against the grid resolution) or
    any vectorized callable V(x).
    """
    if not mass > 0:
        raise InvalidInputError("mass must be positive")
    h = g.spacing
    if isinstance(p, SelfSimilarPotential) and p.block.is_compact and p.block.bound() > 0:
        n_f = p.finest_term(g.x_min, g.x_max)
        if n_f is None:
            raise ResolutionError(
                "grid reaches the fixed point and the series is untruncated; "
                "set n_range (see potential_for_grid) so that h <= (d - c) * lambda^(-n_max) / 8")
        width = p.term_scale_width(n_f)
        if h > width / 8.0 * (1 + 1e-12):
            raise ResolutionError(
                f"grid spacing h={h:.4g} exceeds (d - c) * lambda^(-n)/8 = {width / 8:.4g} "
                f"for the finest retained term n={n_f}")
    x = g.points
    kin = 1.0 / (mass * h * h)
    diag = kin + p(x)
    off = np.full(g.n_points - 1, -0.5 * kin)
    return SymTridiagonal(diag, off)


def core_interval(p: SelfSimilarPotential) -> tuple[float, float] | None:
    """Region around the fixed point where dropped fine-scale terms would act."""
    if p.n_range is None or p.lam == 1.0 or not p.block.is_compact:
        return None
    c, d = p.shifted_support
    reach = max(abs(c), abs(d))
    n_cut = p.n_range[1] + 1 if p.lam > 1 else p.n_range[0] - 1
    r = reach * p.lam ** (-n_cut)
    xs = p.fixed_point
    return (xs - r, xs + r)


def solve_spectrum(H: SymTridiagonal, g: Grid, window=None, core=None,
                   edge_fraction: float = EDGE_FRACTION, edge_tol: float = EDGE_TOL) -> list[Eigenpair]:
    """Eigenpairs of H (all, or those with energy in ``window``), grid-normalized."""
    if H.n != g.n_points:
        raise InvalidInputError("Hamiltonian and grid sizes differ")
    dec = eig_sym_tridiagonal(H, want_vectors=True, window=window)
    h = g.spacing
    x = g.points
    n_edge = max(1, int(math.ceil(edge_fraction * g.n_points)))
    core_mask = None
    if core is not None:
        core_mask = (x >= core[0]) & (x <= core[1])
    out = []
    for i, (e, v) in enumerate(zip(dec.values, dec.vectors.T)):
        psi = np.real(v) / math.sqrt(h)
        dens = psi * psi * h
        edge = bool(dens[:n_edge].sum() > edge_tol or dens[-n_edge:].sum() > edge_tol)
        core_hit = bool(core_mask is not None and dens[core_mask].sum() > edge_tol)
        out.append(Eigenpair(float(e), psi, g, edge, core_hit, i))
    return out


# periodic limit -------------------------------------------------------------


@dataclass
class BandStructure:
    """Bloch bands E_{κ,k} of the periodic potential Σ_n U(x + n b)."""

    kappas: np.ndarray
    energies: np.ndarray          # shape (n_kappa, n_bands)
    cell_length: float
    mass: float = DEFAULT_MASS
    grid_kind: str = "inclusive"  # "inclusive" includes both ±π; "shifted" is a periodic midpoint grid
    x_cell: np.ndarray | None = None
    vectors: np.ndarray | None = field(default=None, repr=False)  # (n_kappa, cell_points, n_bands)

    @property
    def n_bands(self) -> int:
        return self.energies.shape[1]

    def band_average(self, k: int) -> float:
        """(1/2π) ∫ E_k(κ) dκ on the stored grid (periodic trapezoid rule)."""
        e = self.energies[:, k]
        if self.grid_kind == "inclusive":
            return float(np.trapezoid(e, self.kappas) / (self.kappas[-1] - self.kappas[0]))
        return float(np.mean(e))


def kappa_grid(n_kappa: int, kind: str = "inclusive") -> np.ndarray:
    if kind == "inclusive":
        return np.linspace(-math.pi, math.pi, n_kappa)
    if kind == "shifted":
        return -math.pi + 2.0 * math.pi * (np.arange(n_kappa) + 0.5) / n_kappa
    raise InvalidInputError(f"unknown kappa grid kind {kind!r}")


def bloch_hamiltonian(v_cell: np.ndarray, h: float, mass: float, kappa: float) -> np.ndarray:
    """Cell matrix with the boundary phase ψ(x + b) = e^{iκ} ψ(x)."""
    n = v_cell.size
    kin = 1.0 / (mass * h * h)
    a = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    a[idx, idx] = kin + v_cell
    a[idx[:-1], idx[1:]] = -0.5 * kin
    a[idx[1:], idx[:-1]] = -0.5 * kin
    a[n - 1, 0] += -0.5 * kin * np.exp(1j * kappa)
    a[0, n - 1] += -0.5 * kin * np.exp(-1j * kappa)
    return a


def solve_bloch(block: BuildingBlock, b: float, mass: float = DEFAULT_MASS, n_kappa: int = 101,
                cell_points: int = 128, n_bands: int = 4, grid_kind: str = "inclusive",
                keep_vectors: bool = False, threads: int = 1) -> BandStructure:
    """Lowest ``n_bands`` Bloch bands of the λ → 1 periodic potential with period b.

    κ points are independent; ``threads`` > 1 solves them concurrently with
    results identical to the serial loop.
    """
    if not b > 0:
        raise PreconditionError("cell length b must be positive")
    if cell_points < 64:
        raise PreconditionError("cell_points must be at least 64")
    if not 1 <= n_bands <= cell_points:
        raise PreconditionError("n_bands must lie in [1, cell_points]")
    per = SelfSimilarPotential(block, 1.0, b)
    h = b / cell_points
    x = np.arange(cell_points) * h
    v = per(x)
    kappas = kappa_grid(n_kappa, grid_kind)
    energies = np.empty((n_kappa, n_bands))
    vecs = np.empty((n_kappa, cell_points, n_bands), dtype=complex) if keep_vectors else None
    def solve(kap):
        return eig_hermitian(HermitianDense(bloch_hamiltonian(v, h, mass, kap)), want_vectors=keep_vectors)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            decs = list(pool.map(solve, kappas))
    else:
        decs = [solve(kap) for kap in kappas]
    for i, dec in enumerate(decs):
        energies[i] = dec.values[:n_bands]
        if keep_vectors:
            # normalized over one cell: Σ |ψ|² h = 1
            vecs[i] = dec.vectors[:, :n_bands] / math.sqrt(h)
    return BandStructure(kappas, energies, float(b), mass, grid_kind, x, vecs)


@dataclass
class WannierFunction:
    """Tabulated Wannier function χ(x) of one band, centered on the home cell."""

    x: np.ndarray
    values: np.ndarray
    cell_length: float
    band: int
    n_cells: int
    twist: complex = 1.0  # χ(x + n_cells b) = twist · χ(x) on a full supercell

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    def translate(self, m: int) -> np.ndarray:
        """Samples of χ(x − m b) on the same (twisted-periodic supercell) abscissae."""
        per_cell = self.values.size // self.n_cells
        k = (m % self.n_cells) * per_cell
        wraps = (m - m % self.n_cells) // self.n_cells
        out = np.roll(self.values, k) * self.twist ** (-wraps)
        # entries that wrapped around the supercell pick up one factor of the twist
        out[:k] = out[:k] / self.twist
        return out

    def overlap(self, m: int) -> complex:
        """⟨χ_0|χ_m⟩ on the supercell."""
        return complex(np.vdot(self.values, self.translate(m)) * self.spacing)


def _gauge_fix(bs: BandStructure, band: int, avg_tol: float = 1e-3):
    """Bloch vectors of ``band`` with the periodic part u_κ made real-positive on average."""
    b = bs.cell_length
    x = bs.x_cell
    out = np.empty((bs.kappas.size, x.size), dtype=complex)
    prev_u = None
    for i, kap in enumerate(bs.kappas):
        psi = bs.vectors[i, :, band]
        u = psi * np.exp(-1j * kap * x / b)
        avg = np.mean(u)
        if abs(avg) > avg_tol * np.max(np.abs(u)):
            phase = np.conj(avg) / abs(avg)
        elif prev_u is not None:
            ov = np.vdot(prev_u, u)
            phase = np.conj(ov) / abs(ov) if abs(ov) > 0 else 1.0
        else:
            phase = 1.0
        u = u * phase
        out[i] = psi * phase
        prev_u = u
    return out


def wannier_from_bloch(bs: BandStructure, band: int = 0, n_cells: int | None = None,
                       gap_tol: float = 1e-8) -> WannierFunction:
    """Wannier function χ(x) = (1/n_κ) Σ_κ ψ_κ(x) tabulated on a supercell.

    Requires a periodic κ grid (``grid_kind="shifted"``, or "inclusive" whose
    duplicated endpoint is dropped) and stored vectors. The supercell spans
    n_κ cells, centered on the home cell [0, b), where translates of χ are
    exactly orthonormal.
    """
    if bs.vectors is None:
        raise PreconditionError("band structure was computed without eigenvectors (keep_vectors=True)")
    if not 0 <= band < bs.n_bands:
        raise PreconditionError(f"band {band} not available")
    kappas, energies, vectors = bs.kappas, bs.energies, bs.vectors
    if bs.grid_kind == "inclusive":
        kappas, energies, vectors = kappas[:-1], energies[:-1], vectors[:-1]
    scale = max(1.0, float(np.max(np.abs(energies))))
    if band > 0:
        gap = np.min(energies[:, band] - energies[:, band - 1])
        if gap < gap_tol * scale:
            raise GaugeError(f"band {band} touches band {band - 1} on the kappa grid (gap {gap:.3e}); "
                             "refine or shift the kappa grid")
    if band + 1 < bs.n_bands:
        gap = np.min(energies[:, band + 1] - energies[:, band])
        if gap < gap_tol * scale:
            raise GaugeError(f"band {band} touches band {band + 1} on the kappa grid (gap {gap:.3e}); "
                             "refine or shift the kappa grid")
    sub = BandStructure(kappas, energies, bs.cell_length, bs.mass, "shifted", bs.x_cell, vectors)
    psi = _gauge_fix(sub, band)
    nk = kappas.size
    n_cells = nk if n_cells is None else int(n_cells)
    if n_cells > nk:
        raise PreconditionError("window cannot exceed the n_kappa-cell supercell")
    b = bs.cell_length
    half = n_cells // 2
    cells = np.arange(-half, n_cells - half)
    x = (cells[:, None] * b + bs.x_cell[None, :]).ravel()
    phases = np.exp(1j * np.outer(cells, kappas))          # e^{iκ j}
    vals = (phases @ psi) / nk                              # (cells, cell_points)
    vals = vals.ravel()
    twist = complex(np.exp(1j * kappas[0] * nk)) if n_cells == nk else 1.0
    return WannierFunction(x, vals, b, band, n_cells, twist)
