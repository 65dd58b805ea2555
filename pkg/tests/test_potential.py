import json
import math

import numpy as np
import pytest

from affinestark.errors import ConfigurationError
from affinestark.potential import (BuildingBlock, SelfSimilarPotential, affine_orbit, check_self_similarity,
                                   default_potential, eval_potential, export_potential_csv, load_potential)

from oracles import bump, direct_potential_sum


def test_orbit_identity_and_example():
    assert affine_orbit(0.3, 0, 1.7, 2.0) == 0.3
    assert affine_orbit(1.0, 2, 2.0, 1.0) == 7.0


def test_orbit_one_step_law():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x = rng.uniform(-10, 10)
        n = int(rng.integers(-5, 6))
        lam = rng.uniform(0.5, 2.0)
        b = rng.uniform(-3, 3)
        lhs = affine_orbit(x, n + 1, lam, b)
        rhs = lam * affine_orbit(x, n, lam, b) + b
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_orbit_inverse():
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(affine_orbit(affine_orbit(x, 4, 1.3, 0.7), -4, 1.3, 0.7), x, atol=1e-13)


def test_single_overlapping_term():
    p = SelfSimilarPotential(BuildingBlock.bump(1.0, 2.0, 1.0), 2.0, 0.0)
    assert eval_potential(p, 1.5) == pytest.approx(p.block(1.5), abs=1e-15)
    assert eval_potential(p, 3.0) == pytest.approx(eval_potential(p, 1.5) / 4.0, rel=1e-15)


def test_matches_direct_series():
    block = BuildingBlock.bump(1.0, 2.0, -30.0)
    p = SelfSimilarPotential(block, 1.2, 0.5)
    u = bump(1.0, 2.0, -30.0)
    rng = np.random.default_rng(1)
    xs = rng.uniform(-2.3, 6.0, 2000)
    got = p(xs)
    ref = np.array([direct_potential_sum(u, 1.2, 0.5, x) for x in xs])
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_self_similarity_compact_exact_map():
    # λ = 2, b = 0: x -> λx + b is exact in binary, so the defect is pure evaluation error
    p = SelfSimilarPotential(BuildingBlock.bump(1.0, 2.0, -30.0), 2.0, 0.0)
    xs = np.concatenate([-np.geomspace(1e-4, 50, 1500), np.geomspace(1e-4, 50, 1500)])
    assert check_self_similarity(p, xs) <= 1e-12


def test_self_similarity_compact_default():
    # λ = 1.2: rounding of λx + b moves the comparison point by an ulp, which the
    # steep bump edges turn into ~1e-12 relative; 1e-11 covers |x − x*| >= 1e-3
    p = default_potential()
    xs = p.fixed_point + np.concatenate([np.linspace(-30, -1e-3, 1500), np.linspace(1e-3, 50, 1500)])
    assert check_self_similarity(p, xs) <= 1e-11


def test_self_similarity_cosine_truncated():
    p = SelfSimilarPotential(BuildingBlock("cosine", {"omega": 5.0}), 0.8, 0.0, (-30, 30))
    xs = np.linspace(-2.0, 2.0, 801)
    defect = check_self_similarity(p, xs)
    # the defect equals the dropped/added end terms exactly
    lam2 = p.lam ** 2
    bound = np.abs(p.truncation_bound(xs))
    v = p(xs)
    direct = np.abs(lam2 * p(p.lam * xs + p.b) - v)
    np.testing.assert_allclose(direct, bound, atol=1e-12 * np.max(np.abs(v)))
    assert defect > 0


@pytest.mark.xfail(strict=True, reason="cosine block at lambda=0.8: the n=-30 term has weight 0.8^-60 ~ 6.5e5, "
                                       "so the truncation defect is O(1) relative, far above 1e-8")
def test_self_similarity_cosine_within_1e8():
    p = SelfSimilarPotential(BuildingBlock("cosine", {"omega": 5.0}), 0.8, 0.0, (-30, 30))
    xs = np.linspace(-2.0, 2.0, 801)
    assert check_self_similarity(p, xs) <= 1e-8


def test_zero_block():
    p = SelfSimilarPotential(BuildingBlock.zero(), 1.3, 1.0)
    xs = np.linspace(-10, 10, 101)
    assert check_self_similarity(p, xs) == 0.0
    assert np.all(p(xs) == 0.0)


def test_periodic_limit():
    p = SelfSimilarPotential(BuildingBlock.bump(0.2, 0.8, -5.0), 1.0, 1.0)
    xs = np.linspace(-3, 3, 301)
    np.testing.assert_allclose(p(xs + 1.0), p(xs), atol=1e-14)
    assert math.isinf(p.fixed_point)


def test_fixed_point_inside_support_rejected():
    with pytest.raises(ConfigurationError):
        SelfSimilarPotential(BuildingBlock.bump(1.0, 2.0), 2.0, -1.5)


def test_invalid_parameters():
    with pytest.raises(ConfigurationError):
        BuildingBlock("square", {})
    with pytest.raises(ConfigurationError):
        BuildingBlock.bump(2.0, 1.0)
    with pytest.raises(ConfigurationError):
        SelfSimilarPotential(BuildingBlock.bump(), -1.0)
    with pytest.raises(ConfigurationError):
        SelfSimilarPotential(BuildingBlock("cosine", {}), 1.2, 0.0)
    with pytest.raises(ConfigurationError):
        SelfSimilarPotential(BuildingBlock.bump(), 1.0, 0.0)


def test_round_trip(tmp_path):
    p = default_potential(lam=1.3, depth=-100.0)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(p.to_dict()))
    q = load_potential(path)
    assert q == p
    with pytest.raises(ConfigurationError):
        SelfSimilarPotential.from_dict({**p.to_dict(), "extra": 1})


def test_export_csv(tmp_path):
    p = default_potential()
    xs = np.linspace(-4.5, 10, 11)
    path = export_potential_csv(p, xs, tmp_path / "v.csv")
    text = path.read_bytes()
    assert text.startswith(b"x,V\r\n")
    rows = text.decode().strip().split("\r\n")[1:]
    vals = np.array([[float(c) for c in r.split(",")] for r in rows])
    np.testing.assert_array_equal(vals[:, 1], p(xs))


def test_lazy_term_count_bounded():
    p = default_potential()
    xs = p.fixed_point + np.geomspace(1e-6, 50, 200)
    assert np.max(p.terms_touched(xs)) <= p.max_terms_per_point()
