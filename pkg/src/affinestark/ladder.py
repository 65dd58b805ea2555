"""Geometric ladder detection, rung labelling, and the wavefunction scaling check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import AmbiguityError, InsufficientOverlapError, PreconditionError
from .potential import SelfSimilarPotential, affine_orbit
from .schrodinger import BandStructure, Eigenpair


@dataclass
class Rung:
    n_lambda: int
    energy: float
    eigen_index: int


@dataclass
class Ladder:
    epsilon: float
    rungs: list[Rung]

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.rungs])

    @property
    def n_lambdas(self) -> np.ndarray:
        return np.array([r.n_lambda for r in self.rungs], dtype=int)

    def ratios(self) -> np.ndarray:
        """E_{n+1}/E_n for consecutive rung numbers present in the ladder."""
        n = self.n_lambdas
        e = self.energies
        out = []
        for i in range(len(n) - 1):
            if n[i + 1] == n[i] + 1:
                out.append(e[i + 1] / e[i])
        return np.array(out)


@dataclass
class LadderDecomposition:
    lam: float
    ladders: list[Ladder]
    residual: float
    sign: int = 1
    excluded: list[tuple[int, float, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "sign": self.sign,
            "residual": self.residual,
            "ladders": [{"epsilon": L.epsilon,
                         "rungs": [{"n_lambda": r.n_lambda, "energy": r.energy,
                                    "eigen_index": r.eigen_index} for r in L.rungs]}
                        for L in self.ladders],
            "excluded": [{"eigen_index": i, "energy": e, "reason": why} for i, e, why in self.excluded],
        }

    def plot_rows(self):
        """(n_lambda, log|E|, ladder_id) rows in the log-log layout."""
        rows = []
        for lid, L in enumerate(self.ladders, start=1):
            for r in L.rungs:
                rows.append((r.n_lambda, math.log(abs(r.energy)), lid))
        return rows


def _circular_clusters(res, period, tol):
    """Single-linkage clusters of residues on a circle of circumference ``period``.

    Returns a list of index arrays. Neighbours closer than ``tol`` are linked;
    a separating gap below ``2 tol`` is reported as ambiguous.
    """
    m = res.size
    order = np.argsort(res, kind="stable")
    r = res[order]
    if m == 1:
        return [order]
    gaps = np.empty(m)
    gaps[:-1] = np.diff(r)
    gaps[-1] = r[0] + period - r[-1]
    cut = gaps > tol
    if not np.any(cut):
        if r[-1] - r[0] > period - tol:
            raise AmbiguityError("residues cover the whole circle; no ladder separation",
                                 residues=r.tolist())
        return [order]
    amb = cut & (gaps < 2.0 * tol)
    if np.any(amb):
        i = int(np.argmax(amb))
        raise AmbiguityError(
            f"ladder clusters closer than 2*tol ({gaps[i]:.3e} < {2 * tol:.3e})",
            residues=[float(r[i]), float(r[(i + 1) % m])])
    # start right after the largest gap so no cluster straddles the seam
    start = (int(np.argmax(gaps)) + 1) % m
    clusters = []
    current = [order[start]]
    for k in range(1, m):
        j = (start + k) % m
        if cut[(j - 1) % m]:
            clusters.append(np.array(current))
            current = []
        current.append(order[j])
    clusters.append(np.array(current))
    return clusters


def detect_ladders(energies, lam: float, tol: float = 1e-2, sign: int = 1,
                   trusted=None, reasons=None) -> LadderDecomposition:
    """Group energies of one sign class into geometric ladders ε λ^{2n}.

    Residues r = log|E| mod 2|log λ| are clustered on the circle; each cluster
    is a ladder whose origin ε lies in [E_ref, E_ref λ²) (in |E|), with E_ref
    the smallest trusted |E| of the class. Energies of the other sign, zeros,
    and untrusted entries are listed in ``excluded`` (with ``reasons[i]`` as
    the stated cause when given).
    """
    if not (lam > 0 and lam != 1.0):
        raise PreconditionError("lambda must be positive and different from 1")
    if sign not in (1, -1):
        raise PreconditionError("sign must be +1 or -1")
    e = np.asarray(energies, dtype=float)
    ok = np.ones(e.size, dtype=bool) if trusted is None else np.asarray(trusted, dtype=bool)
    excluded = []
    use = []
    for i, val in enumerate(e):
        if val == 0 or np.sign(val) != sign:
            excluded.append((i, float(val), "sign"))
        elif not ok[i]:
            excluded.append((i, float(val), reasons[i] if reasons is not None else "untrusted"))
        else:
            use.append(i)
    use = np.array(use, dtype=int)
    if use.size == 0:
        return LadderDecomposition(lam, [], 0.0, sign, excluded)
    loglam = math.log(lam)
    period = 2.0 * abs(loglam)
    loga = np.log(np.abs(e[use]))
    res = np.mod(loga, period)
    clusters = _circular_clusters(res, period, tol)
    log_ref = float(np.min(loga))
    ladders = []
    residual = 0.0
    for cl in clusters:
        ang = 2.0 * math.pi * res[cl] / period
        mean_ang = math.atan2(np.mean(np.sin(ang)), np.mean(np.cos(ang)))
        rbar = (mean_ang / (2.0 * math.pi)) * period
        log_eps = log_ref + ((rbar - log_ref) % period)
        if log_eps - log_ref >= period - 1e-12 * (1.0 + abs(log_ref)):
            log_eps -= period
        n_lam = np.rint((loga[cl] - log_eps) / (2.0 * loglam)).astype(int)
        dev = loga[cl] - log_eps - 2.0 * n_lam * loglam
        residual = max(residual, float(np.max(np.abs(dev))))
        if np.unique(n_lam).size != n_lam.size:
            dup = n_lam[np.argmax([np.sum(n_lam == v) for v in n_lam])]
            raise AmbiguityError(f"two energies share rung n_lambda={dup} in one ladder",
                                 residues=res[cl].tolist())
        idx = use[cl]
        order = np.argsort(n_lam)
        rungs = [Rung(int(n_lam[o]), float(e[idx[o]]), int(idx[o])) for o in order]
        ladders.append(Ladder(sign * math.exp(log_eps), rungs))
    ladders.sort(key=lambda L: L.epsilon)
    return LadderDecomposition(lam, ladders, residual, sign, excluded)


def detect_ladders_by_sign(energies, lam: float, tol: float = 1e-2, trusted=None,
                           reasons=None) -> dict:
    """Run detect_ladders on the positive and the negative sign class separately."""
    return {"positive": detect_ladders(energies, lam, tol, +1, trusted, reasons),
            "negative": detect_ladders(energies, lam, tol, -1, trusted, reasons)}


def ladders_from_pairs(pairs: list[Eigenpair], lam: float, tol: float = 1e-2) -> dict:
    """Sign-separated ladder detection on FD eigenpairs, skipping flagged states."""
    energies = [q.energy for q in pairs]
    trusted = [q.trusted for q in pairs]
    reasons = ["edge" if q.edge_flag else "core" if q.core_flag else "" for q in pairs]
    return detect_ladders_by_sign(energies, lam, tol, trusted, reasons)


def synthesize(decomp: LadderDecomposition) -> np.ndarray:
    """Energies ε λ^{2n} regenerated from a decomposition."""
    out = []
    for L in decomp.ladders:
        for r in L.rungs:
            out.append(L.epsilon * decomp.lam ** (2 * r.n_lambda))
    return np.sort(np.array(out))


def ladder_slope(ladder: Ladder) -> float:
    """Least-squares slope of log|E| against n_λ."""
    n = ladder.n_lambdas.astype(float)
    y = np.log(np.abs(ladder.energies))
    if n.size < 2:
        return float("nan")
    return float(np.polyfit(n, y, 1)[0])


# wavefunction scaling -------------------------------------------------------


def verify_wavefunction_scaling(pairs: list[Eigenpair], p: SelfSimilarPotential,
                                rungs=None, min_cells: int = 10) -> list[float]:
    """L² deviation between each rung and the rescaled previous rung.

    For rungs n and n + k the law is φ_{n+k}(x) = λ^{k/2} φ_n(x_k) with x_k the
    k-step affine orbit of x. The comparison uses a cubic spline of φ_n, both
    signs, and only grid points whose image stays inside the grid.
    """
    if len(pairs) < 2:
        return []
    rungs = list(range(len(pairs))) if rungs is None else [int(r) for r in rungs]
    if len(rungs) != len(pairs) or any(b <= a for a, b in zip(rungs, rungs[1:])):
        raise PreconditionError("rungs must be strictly increasing and match pairs")
    out = []
    for (a, b), (na, nb) in zip(zip(pairs, pairs[1:]), zip(rungs, rungs[1:])):
        k = nb - na
        g = a.grid
        x = g.points
        spline = CubicSpline(x, a.wavefunction)
        xk = affine_orbit(x, k, p.lam, p.b)
        inside = (xk >= g.x_min) & (xk <= g.x_max)
        if np.count_nonzero(inside) < min_cells + 1:
            raise InsufficientOverlapError(
                f"only {np.count_nonzero(inside)} grid points map inside the domain")
        target = b.wavefunction[inside]
        mapped = p.lam ** (k / 2.0) * spline(xk[inside])
        h = g.spacing
        d = min(math.sqrt(np.sum((target - s * mapped) ** 2) * h) for s in (1.0, -1.0))
        out.append(float(d))
    return out


# band-center prediction ------------------------------------------------------


def predict_ladder_origins(bs: BandStructure, lam: float | None = None) -> list[float]:
    """Band centers (1/2π)∫E_{κ,k}dκ, one per band, as predicted ladder origins."""
    return [bs.band_average(k) for k in range(bs.n_bands)]


def nearest_member(epsilon: float, target: float, lam: float) -> float:
    """Member of {ε λ^{2n}} closest to ``target`` in log distance (same sign)."""
    if epsilon == 0 or target == 0 or np.sign(epsilon) != np.sign(target):
        return float("nan")
    step = 2.0 * math.log(lam)
    n = round((math.log(abs(target)) - math.log(abs(epsilon))) / step)
    return epsilon * lam ** (2 * n)


def fold_to_interval(value: float, e_ref: float, lam: float) -> float:
    """Map ``value`` into the fundamental interval [E_ref, E_ref λ²) by powers of λ²."""
    period = 2.0 * abs(math.log(lam))
    lr = math.log(abs(e_ref))
    lv = math.log(abs(value))
    return math.copysign(math.exp(lr + (lv - lr) % period), value)
