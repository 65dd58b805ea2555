"""Dense Hermitian eigenproblems via Householder reduction and QL."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, InvalidInputError
from . import _kernels
from .tridiagonal import EigenDecomposition, _fix_signs, _orthonormalize_clusters

MAX_DENSE = 4096


@dataclass(frozen=True)
class HermitianDense:
    """Dense complex Hermitian matrix; Hermiticity is checked and then enforced."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("matrix entries must be finite")
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        asym = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
        if asym > 1e-12 * scale:
            raise InvalidInputError(
                f"matrix is not Hermitian: max |A - A^H| = {asym:.3e} (scale {scale:.3e})")
        object.__setattr__(self, "entries", 0.5 * (a + a.conj().T))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def is_real(self) -> bool:
        return not np.any(self.entries.imag)


def _as_hermitian(m) -> HermitianDense:
    return m if isinstance(m, HermitianDense) else HermitianDense(m)


def _graded_flip(a: np.ndarray) -> bool:
    """True when large entries sit at the top-left, so the order should be reversed."""
    n = a.shape[0]
    if n < 4:
        return False
    q = max(1, n // 4)
    top = np.abs(np.diag(a)[:q]).sum() + np.abs(a[:q, :q]).sum()
    bottom = np.abs(np.diag(a)[-q:]).sum() + np.abs(a[-q:, -q:]).sum()
    return top > bottom


def _real_symmetric_eig(a: np.ndarray, want_vectors: bool):
    """Eigenpairs of a real symmetric matrix via tred2 + QL (unsorted)."""
    n = a.shape[0]
    flip = _graded_flip(a)
    z = np.array(a[::-1, ::-1] if flip else a, dtype=float, order="C")
    d, e = _kernels.householder_tridiagonal(z)
    # e[i] couples i-1 and i; the QL kernel wants e[i] coupling i and i+1
    e = np.concatenate([e[1:], [0.0]])
    zt = np.ascontiguousarray(z.T) if want_vectors else np.zeros((1, 1))
    status = _kernels.implicit_ql(d, e, zt, want_vectors)
    if status:
        raise ConvergenceError(f"QL iteration did not converge for eigenvalue {status - 1}")
    if not want_vectors:
        return d, None
    vecs = zt.T
    if flip:
        vecs = vecs[::-1, :]
    return d, np.ascontiguousarray(vecs)


def tridiagonalize(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Householder reduction of a real symmetric matrix: returns (diag, offdiag, Q)."""
    a = np.array(m, dtype=float)
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(np.max(np.abs(a)), 1e-300)):
        raise InvalidInputError("tridiagonalize expects a real symmetric matrix")
    z = np.array(a, order="C")
    d, e = _kernels.householder_tridiagonal(z)
    return d, e[1:].copy(), z


def _embed(a: np.ndarray) -> np.ndarray:
    """Interleaved real embedding: entry (2i+r, 2j+s) of [[Re, -Im], [Im, Re]].

    Interleaving keeps each complex site's two real rows adjacent, so a
    graded ordering of the complex matrix survives the embedding.
    """
    n = a.shape[0]
    r = np.empty((2 * n, 2 * n))
    r[0::2, 0::2] = a.real
    r[1::2, 1::2] = a.real
    r[0::2, 1::2] = -a.imag
    r[1::2, 0::2] = a.imag
    return r


def _pair_embedded(values, vectors, n, scale):
    """Collapse the doubled spectrum of the embedding onto complex eigenpairs."""
    order = np.argsort(values, kind="stable")
    values = values[order]
    pair_vals = 0.5 * (values[0::2] + values[1::2])
    if vectors is None:
        return pair_vals, None
    vectors = vectors[:, order]
    cand = vectors[0::2, :] + 1j * vectors[1::2, :]
    out = np.empty((n, n), dtype=complex)
    tol = 1e3 * np.finfo(float).eps
    i = 0
    while i < n:
        j = i + 1
        while j < n and pair_vals[j] - pair_vals[j - 1] <= tol * max(
                abs(pair_vals[j]), abs(pair_vals[j - 1]), 1e-300) + 64 * np.finfo(float).eps * scale:
            j += 1
        block = cand[:, 2 * i:2 * j]
        chosen = []
        for col in range(block.shape[1]):
            v = block[:, col].copy()
            for u in chosen:
                v -= np.vdot(u, v) * u
            nv = np.linalg.norm(v)
            if nv > 0.5:
                chosen.append(v / nv)
            if len(chosen) == j - i:
                break
        if len(chosen) != j - i:
            raise ConvergenceError("could not extract complex eigenvectors from the real embedding")
        out[:, i:j] = np.column_stack(chosen)
        i = j
    return pair_vals, out


def eig_hermitian(m, want_vectors: bool = True) -> EigenDecomposition:
    """Full eigendecomposition of a dense Hermitian matrix.

    Real input is reduced directly; complex input goes through the 2n x 2n
    real symmetric embedding and the doubled eigenvalues are paired.
    """
    h = _as_hermitian(m)
    n = h.n
    if n > MAX_DENSE:
        raise InvalidInputError(f"dense solver limited to n <= {MAX_DENSE}, got {n}")
    if n == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0), dtype=complex))
    a = h.entries
    scale = float(np.max(np.abs(a)))
    if h.is_real():
        vals, vecs = _real_symmetric_eig(a.real, want_vectors)
        order = np.argsort(vals, kind="stable")
        vals = vals[order]
        if not want_vectors:
            return EigenDecomposition(vals, None)
        vecs = _orthonormalize_clusters(vals, vecs[:, order], 64 * np.finfo(float).eps * scale)
        return EigenDecomposition(vals, _fix_signs(vecs).astype(complex))
    vals, vecs = _real_symmetric_eig(_embed(a), want_vectors)
    vals, vecs = _pair_embedded(vals, vecs, n, scale)
    if not want_vectors:
        return EigenDecomposition(vals, None)
    return EigenDecomposition(vals, _fix_signs(vecs))


def expm_hermitian(m) -> np.ndarray:
    """Matrix exponential of a Hermitian matrix through its eigendecomposition."""
    dec = eig_hermitian(m)
    v = dec.vectors
    return (v * np.exp(dec.values)) @ v.conj().T


def hermitian_function(m, func) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix spectrally."""
    dec = eig_hermitian(m)
    v = dec.vectors
    return (v * func(dec.values)) @ v.conj().T
