import math

import numpy as np
import pytest

from affinestark.besselmodel import (ARGUMENT_CANDIDATES, CERTIFIED_ARGUMENT, CERTIFIED_CONVENTION, CONVENTIONS,
                                     FORMS, BesselModel, build_model_hamiltonian, coupling_sum_spectrum,
                                     eigenvector_overlaps, exact_eigenvectors, exact_spectrum, interior_mask,
                                     jacobi_anger_check, reconcile, truncation_stability, verify_braiding)
from affinestark.errors import ConfigurationError, PreconditionError
from affinestark.linalg import HermitianDense, eig_hermitian
from affinestark.tightbind import coefficient_constraints_check


# construction ---------------------------------------------------------------------


def test_lambda_one_rejected():
    with pytest.raises(ConfigurationError):
        BesselModel(1.0, 1.0, 1.0, 51)


def test_even_truncation_rejected():
    with pytest.raises(ConfigurationError):
        BesselModel(1.0, 1.0, 1.2, 50)


def test_truncation_too_small():
    with pytest.raises(ConfigurationError):
        build_model_hamiltonian(BesselModel(1.0, 3.0, 1.2, 31), "exponential_form")


def test_hopping_value():
    assert BesselModel(1.0, 1.5, 1.2, 121).g == pytest.approx(1.2 * 1.5 / (2 * 1.44 - 2))


@pytest.mark.parametrize("convention", CONVENTIONS)
@pytest.mark.parametrize("form", FORMS)
def test_zero_coupling_is_diagonal(convention, form):
    m = BesselModel(2.0, 0.0, 1.3, 21, convention)
    H = build_model_hamiltonian(m, form)
    np.testing.assert_allclose(H, np.diag(2.0 * 1.3 ** (2.0 * m.sites)), rtol=1e-13, atol=0.0)


def test_forms_agree_on_interior_for_modified_convention():
    m = BesselModel(1.0, 1.5, 1.2, 121, "modified")
    a = build_model_hamiltonian(m, "coupling_sum")
    b = build_model_hamiltonian(m, "exponential_form")
    blk = np.ix_(interior_mask(m), interior_mask(m))
    big = np.abs(b[blk]) > 1e-8 * np.max(np.abs(b[blk]))
    assert np.max(np.abs(a[blk] - b[blk])[big] / np.abs(b[blk])[big]) <= 1e-8


def test_literal_coupling_sum_not_hermitian():
    m = BesselModel(1.0, 1.5, 1.2, 121, "literal")
    a = build_model_hamiltonian(m, "coupling_sum")
    assert np.max(np.abs(a - a.conj().T)) > 0.1 * np.max(np.abs(a))


def test_exponential_form_positive_definite():
    m = BesselModel(0.5, 1.5, 1.2, 61)
    vals = eig_hermitian(HermitianDense(build_model_hamiltonian(m, "exponential_form"))).values
    assert vals[0] > 0


# spectrum ---------------------------------------------------------------------------


def test_zero_coupling_spectrum_exact():
    lv = exact_spectrum(BesselModel(1.0, 0.0, 1.3, 41))
    assert max(q.rel_deviation for q in lv) <= 1e-14


def test_interior_levels_match_ladder():
    m = BesselModel(1.0, 1.0, 1.3, 201)
    lv = {q.n: q for q in exact_spectrum(m)}
    central = [lv[n] for n in range(-10, 10)]
    assert max(q.rel_deviation for q in central) <= 1e-8
    big = {q.n: q.energy for q in exact_spectrum(BesselModel(1.0, 1.0, 1.3, 301))}
    assert max(abs(q.energy / big[q.n] - 1.0) for q in central) <= 1e-10
    assert truncation_stability(m) <= 1e-10


def test_one_level_per_rung():
    m = BesselModel(1.0, 1.0, 1.3, 201)
    ns = [q.n for q in exact_spectrum(m)]
    assert ns == list(range(ns[0], ns[-1] + 1))
    assert len(ns) == 2 * (m.half - m.edge_margin) + 1


def test_coupling_sum_spectrum_matches():
    m = BesselModel(1.0, 1.0, 1.3, 201)
    assert max(q.rel_deviation for q in coupling_sum_spectrum(m)) <= 1e-8
    with pytest.raises(PreconditionError):
        coupling_sum_spectrum(BesselModel(1.0, 1.0, 1.3, 201, "literal"))


# eigenvectors -------------------------------------------------------------------------


def test_zero_coupling_eigenvectors():
    m = BesselModel(1.0, 0.0, 1.3, 41)
    c = exact_eigenvectors(m, 3)
    np.testing.assert_array_equal(c, (m.sites == 3).astype(float))


def test_certified_argument_overlap():
    m = BesselModel(1.0, 1.5, 1.2, 121)
    ov = eigenvector_overlaps(m, [-20, -5, 0, 7, 20])
    assert min(ov[CERTIFIED_ARGUMENT]) >= 1.0 - 1e-6
    for name in ARGUMENT_CANDIDATES:
        if name != CERTIFIED_ARGUMENT:
            assert max(ov[name]) < 0.5


def test_neighbouring_rungs_orthogonal():
    m = BesselModel(1.0, 1.5, 1.2, 121)
    for n in (-10, 0, 10):
        c0, c1 = exact_eigenvectors(m, n), exact_eigenvectors(m, n + 1)
        assert abs(np.dot(c0, c1)) <= 1e-10
        assert abs(np.dot(c0, c0) - 1.0) <= 1e-12


def test_eigenvectors_satisfy_coefficient_constraints():
    m = BesselModel(1.0, 1.5, 1.2, 121)
    c = exact_eigenvectors(m, 0)
    assert coefficient_constraints_check(c, max_shift=20).max_violation <= 1e-10


def test_edge_rung_rejected():
    m = BesselModel(1.0, 1.5, 1.2, 121)
    with pytest.raises(PreconditionError):
        exact_eigenvectors(m, m.half)


# braiding identities ----------------------------------------------------------------------


def test_braiding_at_zero():
    rep = verify_braiding(0.0, 0.7, 61)
    assert rep.residuals["shift_conjugation"] == 0.0
    assert rep.residuals["symmetric_split"] == 0.0
    assert rep.residuals["antisymmetric"] <= 1e-13
    assert "similarity" not in rep.residuals
    assert rep.commutator == 0.0


@pytest.mark.parametrize("truncation", [121, 181])
def test_braiding_interior(truncation):
    rep = verify_braiding(0.4, 0.7, truncation)
    assert set(rep.residuals) == {"shift_conjugation", "antisymmetric", "similarity", "symmetric_split"}
    assert max(rep.residuals.values()) <= 1e-8
    assert rep.commutator <= 1e-13


# Jacobi-Anger and reconciliation ------------------------------------------------------------


def test_jacobi_anger_zero():
    rep = jacobi_anger_check(0.0)
    assert all(v == 0.0 for v in rep.deviations.values())


def test_jacobi_anger_two():
    rep = jacobi_anger_check(2.0)
    assert rep.deviations["modified_vs_real_exp"] <= 1e-10
    assert rep.deviations["literal_vs_unit_exp"] <= 1e-10
    assert rep.deviations["literal_vs_real_exp"] > 1.0
    assert rep.certified == "modified"


def test_reconcile_report():
    rep = reconcile()
    assert rep["convention"] == CERTIFIED_CONVENTION
    assert rep["argument_choice"] == CERTIFIED_ARGUMENT
    ent = rep["residuals"]["interior_entry_rel_diff"]
    assert ent["modified"] <= 1e-8 < ent["literal"]
