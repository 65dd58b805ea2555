"""Symmetric tridiagonal matrices and their eigendecomposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, InvalidInputError
from . import _kernels


@dataclass(frozen=True)
class SymTridiagonal:
    """Real symmetric tridiagonal matrix given by its diagonal and off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float).reshape(-1)
        e = np.asarray(self.offdiag, dtype=float).reshape(-1)
        if d.size < 1:
            raise InvalidInputError("tridiagonal matrix needs at least one diagonal entry")
        if e.size != d.size - 1:
            raise InvalidInputError(
                f"offdiag must have {d.size - 1} entries, got {e.size}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise InvalidInputError("tridiagonal entries must be finite")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, v):
        v = np.asarray(v)
        out = self.diag[:, None] * v if v.ndim == 2 else self.diag * v
        if self.n > 1:
            e = self.offdiag if v.ndim == 1 else self.offdiag[:, None]
            out[:-1] += e * v[1:]
            out[1:] += e * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        if self.n > 1:
            a += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return a

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.sqrt(np.sum(self.diag ** 2) + 2.0 * np.sum(self.offdiag ** 2)))


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with (optionally) column eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray | None = field(default=None)

    def __len__(self):
        return self.values.size


def _fix_signs(vectors):
    """Make the largest-magnitude entry of each column real and positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    if np.iscomplexobj(vectors):
        phase = np.conj(pivots) / np.abs(pivots)
    else:
        phase = np.sign(pivots)
        phase[phase == 0] = 1.0
    return vectors * phase


def _orthonormalize_clusters(values, vectors, tol):
    """Gram-Schmidt in index order inside clusters of (numerically) equal values."""
    n = values.size
    i = 0
    while i < n:
        j = i + 1
        while j < n and values[j] - values[j - 1] <= tol:
            j += 1
        if j - i > 1:
            block = vectors[:, i:j]
            for a in range(block.shape[1]):
                for b in range(a):
                    block[:, a] -= np.vdot(block[:, b], block[:, a]) * block[:, b]
                block[:, a] /= np.linalg.norm(block[:, a])
            vectors[:, i:j] = block
        i = j
    return vectors


def _finish(values, vectors, scale):
    order = np.argsort(values, kind="stable")
    values = values[order]
    if vectors is None:
        return EigenDecomposition(values, None)
    vectors = vectors[:, order]
    tol = 64.0 * np.finfo(float).eps * max(scale, np.finfo(float).tiny)
    vectors = _orthonormalize_clusters(values, vectors, tol)
    return EigenDecomposition(values, _fix_signs(vectors))


def eig_sym_tridiagonal(m: SymTridiagonal, want_vectors: bool = True,
                        window: tuple[float, float] | None = None) -> EigenDecomposition:
    """Eigenpairs of a symmetric tridiagonal matrix.

    Without ``window`` all eigenpairs come from implicit-shift QL. With
    ``window=(lo, hi)`` only eigenvalues in ``(lo, hi]`` are computed, by
    Sturm bisection plus inverse iteration, which is much cheaper for large
    finite-difference grids.
    """
    if not isinstance(m, SymTridiagonal):
        m = SymTridiagonal(*m)
    if window is not None:
        return _windowed(m, want_vectors, window)
    n = m.n
    d = m.diag.copy()
    e = np.zeros(n)
    e[: n - 1] = m.offdiag
    zt = np.eye(n) if want_vectors else np.zeros((1, 1))
    status = _kernels.implicit_ql(d, e, zt, want_vectors)
    if status:
        raise ConvergenceError(f"QL iteration did not converge for eigenvalue {status - 1}")
    vectors = np.ascontiguousarray(zt.T) if want_vectors else None
    return _finish(d, vectors, float(np.max(np.abs(d))) if n else 0.0)


def _pivmin(m: SymTridiagonal) -> float:
    e2max = float(np.max(m.offdiag ** 2)) if m.n > 1 else 0.0
    return np.finfo(float).tiny * max(1.0, e2max)


def gershgorin_bounds(m: SymTridiagonal) -> tuple[float, float]:
    r = np.zeros(m.n)
    if m.n > 1:
        r[:-1] += np.abs(m.offdiag)
        r[1:] += np.abs(m.offdiag)
    lo = float(np.min(m.diag - r))
    hi = float(np.max(m.diag + r))
    pad = 4.0 * np.finfo(float).eps * max(abs(lo), abs(hi), 1.0)
    return lo - pad, hi + pad


def count_below(m: SymTridiagonal, x: float) -> int:
    """Number of eigenvalues strictly smaller than ``x`` (Sylvester inertia)."""
    return int(_kernels.sturm_count(m.diag, m.offdiag ** 2, float(x), _pivmin(m)))


def bisect_eigenvalues(m: SymTridiagonal, lo: float | None = None,
                       hi: float | None = None) -> np.ndarray:
    """Eigenvalues in ``(lo, hi]`` by Sturm-sequence bisection (all by default)."""
    glo, ghi = gershgorin_bounds(m)
    lo = glo if lo is None else max(float(lo), glo)
    hi = ghi if hi is None else min(float(hi), ghi)
    if hi <= lo:
        return np.zeros(0)
    e2 = m.offdiag ** 2
    piv = _pivmin(m)
    k0 = int(_kernels.sturm_count(m.diag, e2, lo, piv))
    k1 = int(_kernels.sturm_count(m.diag, e2, hi, piv))
    return _kernels.bisect_indices(m.diag, e2, lo, hi, k0, k1, piv)


def _windowed(m, want_vectors, window):
    lo, hi = (float(w) for w in window)
    if not hi > lo:
        raise InvalidInputError("energy window must satisfy lo < hi")
    values = bisect_eigenvalues(m, lo, hi)
    if not want_vectors or values.size == 0:
        vecs = np.zeros((m.n, 0)) if want_vectors else None
        return EigenDecomposition(values, vecs)
    rng = np.random.default_rng(12345)
    start = rng.uniform(-1.0, 1.0, size=(m.n, values.size))
    cluster_tol = 1e-3 * float(np.max(np.abs(m.diag)) + 2.0 * np.max(np.abs(m.offdiag), initial=0.0))
    vecs = _kernels.inverse_iteration(m.diag, m.offdiag, values, start, cluster_tol)
    return EigenDecomposition(values, _fix_signs(vecs))
