"""End-to-end experiment runners used by the command-line interface.

Each runner takes a validated ExperimentConfig and an output directory,
writes its data files, and returns the list of written paths together with
a summary dictionary.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .besselmodel import (BesselModel, coupling_sum_spectrum, eigenvector_overlaps, exact_eigenvectors,
                          exact_spectrum, jacobi_anger_check, reconcile, truncation_stability,
                          verify_braiding)
from .config import ExperimentConfig
from .errors import PreconditionError
from .io import write_csv, write_json
from .ladder import (ladder_slope, ladders_from_pairs, nearest_member, predict_ladder_origins,
                     verify_wavefunction_scaling)
from .potential import FIXED_POINT_CLAMP, SelfSimilarPotential, check_self_similarity, eval_potential
from .scalebasis import (basis_family, check_localization, check_orthonormality,
                         make_generator, mass_in_interval, recursion_residual)
from .schrodinger import (Grid, assemble_hamiltonian, core_interval, potential_for_grid, solve_bloch,
                          solve_spectrum, wannier_from_bloch)
from .tightbind import (build_lattice_operator, commutation_residual, compute_matrix_elements,
                        default_generator, interior_ratios, spectrum_from_lattice)

log = logging.getLogger("affinestark")


@dataclass
class RunContext:
    config: ExperimentConfig
    out: Path
    threads: int = 1
    files: list = field(default_factory=list)
    cache: dict = field(default_factory=dict)

    def csv(self, name, header, rows):
        self.files.append(write_csv(self.out / name, header, rows))

    def json(self, name, obj):
        self.files.append(write_json(self.out / name, obj))


def build_potential(cfg: ExperimentConfig) -> SelfSimilarPotential:
    d = cfg["potential"]
    raw = {"block": d["block"], "lambda": d["lambda"], "b": d["b"]}
    if d.get("n_range") is not None:
        raw["n_range"] = d["n_range"]
    return SelfSimilarPotential.from_dict(raw)


def build_grid(cfg: ExperimentConfig, p: SelfSimilarPotential, n_points: int | None = None) -> Grid:
    g = cfg["grid"]
    shift = p.fixed_point if g["relative_to_fixed_point"] and math.isfinite(p.fixed_point) else 0.0
    return Grid(shift + g["x_min"], shift + g["x_max"], n_points or g["n_points"])


def fd_solve(ctx: RunContext, n_points: int | None = None):
    """Potential, grid, and windowed eigenpairs; memoized per resolution."""
    key = ("fd", n_points)
    if key in ctx.cache:
        return ctx.cache[key]
    cfg = ctx.config
    p0 = build_potential(cfg)
    g = build_grid(cfg, p0, n_points)
    p = potential_for_grid(p0, g, cfg["grid"]["resolution_cells"])
    sp = cfg["spectrum"]
    H = assemble_hamiltonian(p, g, cfg["mass"])
    pairs = solve_spectrum(H, g, window=(sp["e_min"], sp["e_max"]), core=core_interval(p),
                           edge_fraction=sp["edge_fraction"], edge_tol=sp["edge_tol"])
    log.info("FD solve: %d points, %d eigenpairs in window", g.n_points, len(pairs))
    ctx.cache[key] = (p, g, pairs)
    return ctx.cache[key]


def fd_ladders(ctx: RunContext, n_points: int | None = None):
    key = ("ladders", n_points)
    if key not in ctx.cache:
        p, g, pairs = fd_solve(ctx, n_points)
        ctx.cache[key] = ladders_from_pairs(pairs, p.lam, ctx.config["ladders"]["tol"])
    return ctx.cache[key]


def bloch_bands(ctx: RunContext, keep_vectors: bool = False, n_kappa: int | None = None,
                grid_kind: str = "inclusive"):
    cfg = ctx.config
    bc = cfg["bloch"]
    n_kappa = n_kappa or bc["n_kappa"]
    key = ("bloch", keep_vectors, n_kappa, grid_kind)
    if key not in ctx.cache:
        p = build_potential(cfg)
        ctx.cache[key] = solve_bloch(p.block, p.b, cfg["mass"], n_kappa, bc["cell_points"], bc["n_bands"],
                                     grid_kind=grid_kind, keep_vectors=keep_vectors, threads=ctx.threads)
    return ctx.cache[key]


# runners ---------------------------------------------------------------------


def run_potential(ctx: RunContext) -> dict:
    cfg = ctx.config
    p = build_potential(cfg)
    pl = cfg["plot"]
    shift = p.fixed_point if cfg["grid"]["relative_to_fixed_point"] and math.isfinite(p.fixed_point) else 0.0
    xs = np.linspace(shift + pl["x_min"], shift + pl["x_max"], pl["n_points"])
    # V diverges at the fixed point; samples landing on it are dropped
    keep = np.abs(xs - p.fixed_point) > FIXED_POINT_CLAMP if math.isfinite(p.fixed_point) else np.ones(xs.size, bool)
    xs = xs[keep]
    v = eval_potential(p, xs)
    ctx.csv("potential.csv", ["x", "V"], zip(xs, v))
    summary = {"potential": p.to_dict(), "fixed_point": p.fixed_point,
               "self_similarity_defect": check_self_similarity(p, xs),
               "decay_class": p.block.decay_class, "n_points": int(xs.size),
               "dropped_at_fixed_point": int(np.count_nonzero(~keep))}
    ctx.json("potential.json", summary)
    return summary


def run_solve(ctx: RunContext) -> dict:
    p, g, pairs = fd_solve(ctx)
    ctx.csv("spectrum.csv", ["index", "energy", "edge_flag", "core_flag"],
            ((q.index, q.energy, q.edge_flag, q.core_flag) for q in pairs))
    stride = ctx.config["spectrum"]["wavefunction_stride"]
    x = g.points[::stride]
    cols = [q.wavefunction[::stride] for q in pairs]
    ctx.csv("wavefunctions.csv", ["x"] + [f"psi_{q.index}" for q in pairs],
            (tuple([xi] + [c[i] for c in cols]) for i, xi in enumerate(x)))
    summary = {"grid": {"x_min": g.x_min, "x_max": g.x_max, "n_points": g.n_points},
               "n_range": list(p.n_range), "n_eigenpairs": len(pairs),
               "n_trusted": sum(q.trusted for q in pairs)}
    ctx.json("solve.json", summary)
    return summary


def _ladder_report(decs: dict) -> dict:
    out = {}
    for name, dec in decs.items():
        d = dec.to_dict()
        d["slopes"] = [ladder_slope(L) for L in dec.ladders]
        d["ratios"] = [L.ratios().tolist() for L in dec.ladders]
        out[name] = d
    return out


def run_ladders(ctx: RunContext) -> dict:
    cfg = ctx.config
    lc = cfg["ladders"]
    p, g, pairs = fd_solve(ctx)
    fine = fd_ladders(ctx)
    coarse = fd_ladders(ctx, cfg["grid"]["coarse_points"])
    lam2 = p.lam ** 2
    rows = []
    for sign_name, dec in fine.items():
        for lid, L in enumerate(dec.ladders, start=1):
            for r in L.rungs:
                rows.append((sign_name, lid, r.n_lambda, math.log(abs(r.energy)), r.energy))
    ctx.csv("ladders_loglog.csv", ["sign", "ladder_id", "n_lambda", "log_abs_energy", "energy"], rows)
    ratios = np.concatenate([L.ratios() for d in fine.values() for L in d.ladders] or [np.empty(0)])
    residual = max(d.residual for d in fine.values())
    ratio_dev = float(np.max(np.abs(ratios - lam2))) if ratios.size else float("nan")
    summary = {
        "lambda": p.lam,
        "grid_points": {"fine": g.n_points, "coarse": cfg["grid"]["coarse_points"]},
        "fine": _ladder_report(fine),
        "coarse": _ladder_report(coarse),
        "residual": residual,
        "ratio_max_deviation": ratio_dev,
        "passed": bool(residual <= lc["residual_max"] and ratios.size > 0 and ratio_dev <= lc["ratio_tol"]),
    }
    ctx.json("ladders.json", summary)
    return summary


def run_scaling_check(ctx: RunContext) -> dict:
    cfg = ctx.config
    sc = cfg["scaling_check"]
    p, g, pairs = fd_solve(ctx)
    decs = fd_ladders(ctx)
    ladders = [L for d in decs.values() for L in sorted(d.ladders, key=lambda L: abs(L.epsilon))]
    if len(ladders) < sc["ladder"]:
        raise PreconditionError(f"ladder {sc['ladder']} requested, {len(ladders)} detected")
    L = ladders[sc["ladder"] - 1]
    by_n = {r.n_lambda: r for r in L.rungs}
    missing = [n for n in sc["rungs"] if n not in by_n]
    if missing:
        raise PreconditionError(f"rungs {missing} not present in ladder {sc['ladder']} "
                                f"(available {sorted(by_n)})")
    rungs = sorted(sc["rungs"])
    sel = [pairs[by_n[n].eigen_index] for n in rungs]
    dev = verify_wavefunction_scaling(sel, p, rungs)
    x = g.points[:: cfg["spectrum"]["wavefunction_stride"]]
    stride = cfg["spectrum"]["wavefunction_stride"]
    cols = [q.wavefunction[::stride] for q in sel]
    ctx.csv("scaling_wavefunctions.csv", ["x"] + [f"phi_n{n}" for n in rungs],
            (tuple([xi] + [c[i] for c in cols]) for i, xi in enumerate(x)))
    summary = {"ladder_epsilon": L.epsilon, "rungs": rungs,
               "energies": [by_n[n].energy for n in rungs],
               "pair_deviations": dev, "max_deviation": max(dev) if dev else float("nan"),
               "passed": bool(dev and max(dev) <= sc["max_deviation"])}
    ctx.json("scaling.json", summary)
    return summary


def run_basis(ctx: RunContext) -> dict:
    bc = ctx.config["basis"]
    lam, b = bc["lambda"], bc["b"]
    a = abs(math.log(lam))
    gen = make_generator(bc["generator"], a, width=bc["width"], n_sites=bc["n_sites"])
    fam = basis_family(gen, lam, b, bc["n_values"])
    rep = check_orthonormality(fam, bc["quad_tol"], radius=bc["sinc_radius_cells"] * a)
    ctx.csv("basis_gram.csv", ["n"] + [f"n{f.n}" for f in fam],
            ([f.n] + list(row) for f, row in zip(fam, rep.gram)))
    xs_fp = fam[0].fixed_point
    xs = xs_fp + np.linspace(-6.0, 6.0, bc["tabulate_points"])
    xs = xs[np.abs(xs - xs_fp) > 1e-9]
    ctx.csv("basis_functions.csv", ["x"] + [f"psi_{f.n}" for f in fam],
            (tuple([x] + [float(f(x)) for f in fam]) for x in xs))
    rng = np.random.default_rng(20240101)
    rx = xs_fp + rng.uniform(-10.0, 10.0, 1000)
    rec = max(recursion_residual(f, rx) for f in fam)
    locs = {}
    for f in fam:
        loc = check_localization(f)
        lo, hi = f.localization_interval()
        locs[str(f.n)] = {"exponent_far": loc.exponent_far, "exponent_near": loc.exponent_near,
                          "passed": loc.passed, "interval": [lo, hi],
                          "mass_in_interval": mass_in_interval(f, lo, hi)}
    summary = {"generator": bc["generator"], "width": bc["width"], "lambda": lam, "b": b,
               "alpha": gen.alpha, "decay_class": gen.decay_class,
               "gram_deviation": rep.deviation, "neglected_mass_bound": rep.neglected_mass_bound,
               "quadrature_error": rep.quadrature_error, "recursion_residual": rec,
               "localization": locs}
    ctx.json("basis.json", summary)
    return summary


def run_tb(ctx: RunContext) -> dict:
    cfg = ctx.config
    tc = cfg["tightbinding"]
    p = build_potential(cfg)
    gen = default_generator(p, tc["width"], tc["n_sites"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tb = compute_matrix_elements(p, gen, tuple(tc["n_window"]), quad_tol=tc["quad_tol"],
                                     mass=cfg["mass"])
    ctx.csv("tb_couplings.csv", ["s", "k", "q", "re", "im", "spread"],
            ((s, k, q, tb.H[s][k, q].real, tb.H[s][k, q].imag, tb.spread[s])
             for s in sorted(tb.H) for k in range(tb.n_bands) for q in range(tb.n_bands)))
    op = build_lattice_operator(tb, tc["truncation"], tc["s_max"])
    lspec = spectrum_from_lattice(op, tc["ladder_tol"])
    ctx.csv("tb_spectrum.csv", ["index", "energy", "edge_flag"],
            ((i, e, f) for i, (e, f) in enumerate(zip(lspec.values, lspec.edge))))
    lam2 = p.lam ** 2
    ratios = {name: interior_ratios(lspec, sgn).tolist() for name, sgn in (("positive", 1), ("negative", -1))}
    all_r = np.array(ratios["positive"] + ratios["negative"])
    cov = tb.covariance_residuals()
    summary = {
        "lambda": p.lam, "generator_center": gen.center, "width": tc["width"],
        "magnitudes": {str(s): tb.magnitude(s) for s in sorted(tb.H) if s >= 0},
        "h3_over_h0": tb.magnitude(3) / tb.magnitude(0) if 3 in tb.H else float("nan"),
        "hermiticity_residual": tb.hermiticity_residual(),
        "covariance_max_excess": max((d - t for _, d, t in cov), default=float("nan")),
        "commutation_residual": commutation_residual(op),
        "operator_norm": float(np.max(np.abs(lspec.values))),
        "ladders": _ladder_report(lspec.ladders),
        "interior_ratios": ratios,
        "ratio_max_deviation": float(np.max(np.abs(all_r - lam2))) if all_r.size else float("nan"),
        "warnings": [str(w.message) for w in caught],
    }
    if tc["compare_fd"]:
        summary["fd_comparison"] = _tb_vs_fd(ctx, lspec, p)
    ctx.json("tb.json", summary)
    return summary


def _tb_vs_fd(ctx: RunContext, lspec, p) -> list:
    fd = fd_ladders(ctx)
    out = []
    for name, dec in lspec.ladders.items():
        for L in dec.ladders:
            best = None
            for F in fd[name].ladders:
                m = nearest_member(F.epsilon, L.epsilon, p.lam)
                if math.isnan(m):
                    continue
                rel = abs(L.epsilon / m - 1.0)
                if best is None or rel < best[1]:
                    best = (m, rel)
            out.append({"sign": name, "tb_epsilon": L.epsilon,
                        "fd_member": best[0] if best else float("nan"),
                        "rel_deviation": best[1] if best else float("nan")})
    return out


def run_bessel(ctx: RunContext, reconcile_only: bool = False) -> dict:
    bc = ctx.config["bessel"]
    if reconcile_only:
        rep = reconcile(bc["Delta"], bc["lambda"], bc["truncation"], bc["epsilon"])
        ctx.json("bessel_reconcile.json", rep)
        return rep
    m = BesselModel(bc["epsilon"], bc["Delta"], bc["lambda"], bc["truncation"])
    lv = exact_spectrum(m)
    ctx.csv("bessel_spectrum.csv", ["n", "energy", "predicted", "rel_deviation"],
            ((q.n, q.energy, q.predicted, q.rel_deviation) for q in lv))
    cs = coupling_sum_spectrum(m)
    rungs = bc["eigenvector_rungs"]
    vecs = [exact_eigenvectors(m, n) for n in rungs]
    ctx.csv("bessel_eigenvectors.csv", ["site"] + [f"c_n{n}" for n in rungs],
            (tuple([int(s)] + [v[i] for v in vecs]) for i, s in enumerate(m.sites)))
    ov = eigenvector_overlaps(m, rungs)
    br = bc["braiding"]
    brep = verify_braiding(br["s"], br["g"], br["truncation"])
    ja = jacobi_anger_check(bc["jacobi_anger"]["Delta"], bc["jacobi_anger"]["n_theta"])
    rec = reconcile(bc["Delta"], bc["lambda"], bc["truncation"], bc["epsilon"])
    summary = {
        "g": m.g, "edge_margin": m.edge_margin, "n_levels": len(lv),
        "exponential_form_max_deviation": max(q.rel_deviation for q in lv),
        "coupling_sum_max_deviation": max(q.rel_deviation for q in cs),
        "truncation_stability": truncation_stability(m),
        "eigenvector_overlaps": ov,
        "braiding": {"s": brep.s, "g": brep.g, "truncation": brep.truncation,
                     "residuals": brep.residuals, "commutator": brep.commutator},
        "jacobi_anger": {"Delta": ja.Delta, "deviations": ja.deviations, "certified": ja.certified},
        "reconcile": rec,
    }
    ctx.json("bessel.json", summary)
    return summary


def run_bloch(ctx: RunContext) -> dict:
    cfg = ctx.config
    bc = cfg["bloch"]
    bs = bloch_bands(ctx)
    ctx.csv("bands.csv", ["kappa"] + [f"E{k + 1}" for k in range(bs.n_bands)],
            (tuple([k] + list(e)) for k, e in zip(bs.kappas, bs.energies)))
    centers = predict_ladder_origins(bs)
    summary = {"n_kappa": int(bs.kappas.size), "band_centers": centers,
               "band_ranges": [[float(bs.energies[:, k].min()), float(bs.energies[:, k].max())]
                               for k in range(bs.n_bands)]}
    wb = bloch_bands(ctx, True, bc["wannier_n_kappa"], "shifted")
    w = wannier_from_bloch(wb, bc["wannier_band"])
    ctx.csv("wannier.csv", ["x", "re", "im"], zip(w.x, w.values.real, w.values.imag))
    summary["wannier_band"] = w.band
    summary["wannier_norm"] = w.overlap(0).real
    summary["wannier_neighbour_overlap"] = abs(w.overlap(1))
    p = build_potential(cfg)
    if math.isfinite(p.fixed_point) and ctx.config["analyses"]["ladders"]:
        decs = fd_ladders(ctx)
        cmp = []
        for c in centers:
            name = "negative" if c < 0 else "positive"
            for L in decs[name].ladders:
                m = nearest_member(L.epsilon, c, p.lam)
                cmp.append({"band_center": c, "fd_epsilon": L.epsilon, "fd_member": m,
                            "rel_deviation": abs(m / c - 1.0) if not math.isnan(m) else float("nan")})
        summary["fd_comparison"] = cmp
    ctx.json("bloch.json", summary)
    return summary


RUNNERS = {
    "potential": run_potential,
    "solve": run_solve,
    "ladders": run_ladders,
    "scaling-check": run_scaling_check,
    "basis": run_basis,
    "tb": run_tb,
    "bessel": run_bessel,
    "bloch": run_bloch,
}

# config toggle names differ from subcommand names in two places
TOGGLES = {"scaling-check": "scaling_check", "tb": "tightbinding"}


def run_all(ctx: RunContext) -> dict:
    out = {}
    for name, fn in RUNNERS.items():
        if ctx.config["analyses"][TOGGLES.get(name, name)]:
            log.info("running %s", name)
            out[name] = fn(ctx)
    return out
