import math

import numpy as np
import pytest

from affinestark.errors import GaugeError, InvalidInputError, PreconditionError, ResolutionError
from affinestark.potential import BuildingBlock, SelfSimilarPotential, default_potential
from affinestark.ladder import detect_ladders
from affinestark.schrodinger import (Grid, assemble_hamiltonian, core_interval, potential_for_grid,
                                     solve_bloch, solve_spectrum, wannier_from_bloch)

from oracles import harmonic_levels, trapezoid_band_average

ZERO = BuildingBlock.zero()


def _zero(x):
    return np.zeros_like(x)


def test_free_stencil():
    g = Grid(0.0, 2.0, 3)
    H = assemble_hamiltonian(_zero, g, mass=0.5)
    np.testing.assert_array_equal(H.diag, [2.0, 2.0, 2.0])
    np.testing.assert_array_equal(H.offdiag, [-1.0, -1.0])


@pytest.mark.parametrize("n", [201, 401])
def test_box_ground_state(n):
    # Dirichlet walls sit one spacing outside the first and last grid points
    g = Grid(0.0, 1.0, n)
    L = 1.0 + 2 * g.spacing
    pairs = solve_spectrum(assemble_hamiltonian(_zero, g), g, window=(0.0, 50.0))
    e1, e2 = pairs[0].energy, pairs[1].energy
    assert abs(e1 - math.pi ** 2 / L ** 2) <= 2.0 * g.spacing ** 2 * (math.pi / L) ** 4
    assert abs(e2 / e1 - 4.0) <= 10.0 * g.spacing ** 2 * (math.pi / L) ** 2


def test_box_second_order_convergence():
    errs = []
    for n in (101, 201, 401):
        g = Grid(0.0, 1.0, n)
        L = 1.0 + 2 * g.spacing
        e1 = solve_spectrum(assemble_hamiltonian(_zero, g), g, window=(0.0, 20.0))[0].energy
        errs.append(abs(e1 - math.pi ** 2 / L ** 2))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_harmonic_low_levels():
    g = Grid(-10.0, 10.0, 2001)
    pairs = solve_spectrum(assemble_hamiltonian(lambda x: x * x, g), g, window=(0.0, 6.0))
    got = [q.energy for q in pairs]
    assert len(got) == 3
    np.testing.assert_allclose(got, harmonic_levels(3), atol=1e-4)


def test_harmonic_higher_levels_converge():
    errs = []
    for n in (2001, 4001):
        g = Grid(-10.0, 10.0, n)
        pairs = solve_spectrum(assemble_hamiltonian(lambda x: x * x, g), g, window=(0.0, 20.0))
        errs.append(np.abs(np.array([q.energy for q in pairs]) - harmonic_levels(len(pairs))))
    ratio = errs[0][3:] / errs[1][3:]
    assert np.all((ratio > 3.8) & (ratio < 4.2))


def test_eigenpair_residual_and_normalization():
    p0 = SelfSimilarPotential(BuildingBlock.bump(1.0, 2.0, -30.0), 1.2, 0.0)
    g = Grid(-20.0, 60.0, 20000)
    p = potential_for_grid(p0, g)
    H = assemble_hamiltonian(p, g)
    pairs = solve_spectrum(H, g, window=(-3000.0, -0.5), core=core_interval(p))
    assert len(pairs) > 10
    h = g.spacing
    for q in pairs:
        v = q.wavefunction * math.sqrt(h)
        assert abs(np.dot(v, v) - 1.0) <= 1e-10
        assert np.linalg.norm(H.matvec(v) - q.energy * v) <= 1e-9 * H.norm()


def test_ladder_ratio_b0():
    # b = 0 puts the fixed point at the origin; the bump on [6, 7] is the default
    # configuration translated by 5, so each well spans |x| in [6, 7] λ^{-n}
    p0 = SelfSimilarPotential(BuildingBlock.bump(6.0, 7.0, -30.0), 1.2, 0.0)
    out = []
    for n in (20000, 40000):
        g = Grid(-20.0, 60.0, n)
        p = potential_for_grid(p0, g)
        pairs = solve_spectrum(assemble_hamiltonian(p, g), g, window=(-3000.0, -0.5), core=core_interval(p))
        dec = detect_ladders([q.energy for q in pairs], 1.2, 0.02, -1, [q.trusted for q in pairs])
        r = np.concatenate([L.ratios() for L in dec.ladders])
        out.append(r)
        assert r.size >= 10
        assert np.max(np.abs(r - 1.44)) <= 1e-3
    # both resolutions give the same ladder
    k = min(out[0].size, out[1].size)
    assert np.max(np.abs(out[0][:k] - out[1][:k])) <= 1e-3


def test_unresolved_grid_rejected():
    p = default_potential()
    g = Grid(p.fixed_point - 20, p.fixed_point + 60, 2000)
    with pytest.raises(ResolutionError):
        assemble_hamiltonian(p, g)


def test_wide_wells_reach_the_core():
    # bump on [1, 2] with b = 0: wells span a factor 2 in |x − x*| and merge, so
    # every bound state reaches the truncated core and is flagged untrusted
    p0 = SelfSimilarPotential(BuildingBlock.bump(1.0, 2.0, -30.0), 1.2, 0.0)
    g = Grid(-20.0, 60.0, 20000)
    p = potential_for_grid(p0, g)
    pairs = solve_spectrum(assemble_hamiltonian(p, g), g, window=(-3000.0, -0.5), core=core_interval(p))
    assert pairs and all(q.core_flag for q in pairs)


def test_core_flag_marks_states_near_fixed_point():
    p0 = default_potential()
    g = Grid(p0.fixed_point - 20, p0.fixed_point + 60, 20000)
    p = potential_for_grid(p0, g)
    pairs = solve_spectrum(assemble_hamiltonian(p, g), g, window=(-1e6, -0.5), core=core_interval(p))
    assert any(q.core_flag for q in pairs)
    assert all(not q.core_flag for q in pairs if q.energy > -3000)


def test_bad_inputs():
    with pytest.raises(InvalidInputError):
        Grid(1.0, 0.0, 10)
    with pytest.raises(InvalidInputError):
        assemble_hamiltonian(_zero, Grid(0, 1, 10), mass=0.0)
    with pytest.raises(PreconditionError):
        solve_bloch(ZERO, 1.0, cell_points=32)


# Bloch bands ------------------------------------------------------------------


def test_free_band_is_folded_parabola():
    bs = solve_bloch(ZERO, 1.0, n_kappa=41, cell_points=128, n_bands=2)
    h = 1.0 / 128
    k = bs.kappas
    # FD dispersion (2 − 2cos(κ_cell h))/h² for the lowest band, κ_cell = κ/b
    assert np.max(np.abs(bs.energies[:, 0] - k ** 2)) <= 2.0 * h ** 2 * np.max(k) ** 4 / 12 + 1e-9


def test_free_band_center():
    bs = solve_bloch(ZERO, 1.0, n_kappa=201, cell_points=128, n_bands=1)
    assert abs(bs.band_average(0) - math.pi ** 2 / 3) <= 1e-3
    assert abs(trapezoid_band_average(lambda k: k * k) - math.pi ** 2 / 3) <= 1e-6


def test_time_reversal():
    bs = solve_bloch(BuildingBlock.bump(0.2, 0.8, -10.0), 1.0, n_kappa=51, n_bands=3)
    np.testing.assert_allclose(bs.energies, bs.energies[::-1], atol=1e-10)


def test_bloch_threads_identical():
    a = solve_bloch(BuildingBlock.bump(0.2, 0.8, -10.0), 1.0, n_kappa=21, n_bands=2)
    b = solve_bloch(BuildingBlock.bump(0.2, 0.8, -10.0), 1.0, n_kappa=21, n_bands=2, threads=3)
    np.testing.assert_array_equal(a.energies, b.energies)


# Wannier ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def free_wannier():
    bs = solve_bloch(ZERO, 1.0, n_kappa=256, cell_points=128, n_bands=2, grid_kind="shifted",
                     keep_vectors=True)
    return wannier_from_bloch(bs, 0)


def test_free_wannier_is_sinc(free_wannier):
    w = free_wannier
    s = np.sinc(w.x)
    ov = abs(np.vdot(s, w.values)) * w.spacing / math.sqrt(np.vdot(s, s).real * w.spacing)
    assert ov >= 0.99


def test_wannier_orthonormal(free_wannier):
    w = free_wannier
    assert abs(w.overlap(0) - 1.0) <= 1e-10
    for m in (1, 2, 5):
        assert abs(w.overlap(m)) <= 1e-6


def test_wannier_completeness(free_wannier):
    # a member of the band: f = χ_0 + 0.5 χ_3 − 0.25 χ_{−2}
    w = free_wannier
    f = w.values + 0.5 * w.translate(3) - 0.25 * w.translate(-2)
    norm = np.vdot(f, f).real * w.spacing
    proj = sum(abs(np.vdot(w.translate(m), f) * w.spacing) ** 2 for m in range(-20, 21))
    assert abs(proj - norm) <= 1e-4 * norm


def test_wannier_needs_vectors():
    bs = solve_bloch(ZERO, 1.0, n_kappa=16, n_bands=1)
    with pytest.raises(PreconditionError):
        wannier_from_bloch(bs, 0)


def test_wannier_band_touching_detected():
    # free particle: bands 1 and 2 touch at κ = ±π on the inclusive grid
    bs = solve_bloch(ZERO, 1.0, n_kappa=17, n_bands=3, keep_vectors=True)
    with pytest.raises(GaugeError):
        wannier_from_bloch(bs, 1)
