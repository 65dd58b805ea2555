"""Compiled inner loops for the eigensolvers.

The reduction and QL iteration follow the classical tred2/tql2 pair, which
works from the last row upward; matrices graded with their large entries in
the lower right corner keep small eigenvalues to high relative accuracy.
"""

import math

import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps
_TINY = np.finfo(np.float64).tiny


@njit(cache=True, nogil=True)
def householder_tridiagonal(z):
    """Reduce the symmetric matrix ``z`` in place.

    On return ``z`` holds the orthogonal transform Q with ``Qᵀ A Q`` tridiagonal.
    Returns ``(d, e)`` where ``e[i]`` couples rows ``i-1`` and ``i`` (``e[0] = 0``).
    """
    n = z.shape[0]
    d = np.zeros(n)
    e = np.zeros(n)
    for i in range(n - 1, 0, -1):
        l = i - 1
        h = 0.0
        scale = 0.0
        if l > 0:
            for k in range(i):
                scale += abs(z[i, k])
            if scale == 0.0:
                e[i] = z[i, l]
            else:
                for k in range(i):
                    z[i, k] /= scale
                    h += z[i, k] * z[i, k]
                f = z[i, l]
                g = -math.sqrt(h) if f >= 0.0 else math.sqrt(h)
                e[i] = scale * g
                h -= f * g
                z[i, l] = f - g
                f = 0.0
                for j in range(i):
                    z[j, i] = z[i, j] / h
                    g = 0.0
                    for k in range(j + 1):
                        g += z[j, k] * z[i, k]
                    for k in range(j + 1, i):
                        g += z[k, j] * z[i, k]
                    e[j] = g / h
                    f += e[j] * z[i, j]
                hh = f / (h + h)
                for j in range(i):
                    f = z[i, j]
                    g = e[j] - hh * f
                    e[j] = g
                    for k in range(j + 1):
                        z[j, k] -= f * e[k] + g * z[i, k]
        else:
            e[i] = z[i, l]
        d[i] = h
    d[0] = 0.0
    e[0] = 0.0
    for i in range(n):
        if d[i] != 0.0:
            for j in range(i):
                g = 0.0
                for k in range(i):
                    g += z[i, k] * z[k, j]
                for k in range(i):
                    z[k, j] -= g * z[k, i]
        d[i] = z[i, i]
        z[i, i] = 1.0
        for j in range(i):
            z[j, i] = 0.0
            z[i, j] = 0.0
    return d, e


@njit(cache=True, nogil=True)
def implicit_ql(d, e, zt, want_vectors, maxit=300):
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    ``d`` (diagonal) and ``e`` (``e[i]`` couples ``i`` and ``i+1``, last entry
    unused) are overwritten; ``d`` ends up holding the eigenvalues. Rotations
    are applied to the rows of ``zt`` (the transposed eigenvector matrix).
    Returns 0 on success, otherwise the index that failed to converge plus one.
    """
    n = d.shape[0]
    nz = zt.shape[1]
    e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = n - 1
            for mm in range(l, n - 1):
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    m = mm
                    break
            if m == l:
                break
            it += 1
            if it > maxit:
                return l + 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                bb = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * bb
                p = s * r
                d[i + 1] = g + p
                g = c * r - bb
                if want_vectors:
                    for k in range(nz):
                        f = zt[i + 1, k]
                        zt[i + 1, k] = s * zt[i, k] + c * f
                        zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


@njit(cache=True, nogil=True)
def sturm_count(d, e2, x, pivmin):
    """Number of eigenvalues strictly below ``x`` (LDLᵀ inertia count)."""
    n = d.shape[0]
    cnt = 0
    q = d[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0.0:
        cnt += 1
    for i in range(1, n):
        q = d[i] - x - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            cnt += 1
    return cnt


@njit(cache=True, nogil=True)
def bisect_indices(d, e2, lo, hi, k_first, k_last, pivmin):
    """Eigenvalues with ascending indices k_first..k_last-1, all inside (lo, hi]."""
    out = np.empty(k_last - k_first)
    for idx in range(k_first, k_last):
        a = lo
        b = hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            width = b - a
            if width <= 2.0 * _EPS * max(abs(a), abs(b)) + pivmin:
                break
            if mid <= a or mid >= b:
                break
            if sturm_count(d, e2, mid, pivmin) > idx:
                b = mid
            else:
                a = mid
        out[idx - k_first] = 0.5 * (a + b)
    return out


@njit(cache=True, nogil=True)
def _gt_solve(dl, dd, du, shift, rhs, tiny_piv):
    """Solve (T - shift) y = rhs with partial pivoting (gttrf/gttrs scheme)."""
    n = dd.shape[0]
    l = dl.copy()
    d = dd - shift
    u = du.copy()
    u2 = np.zeros(max(n - 2, 0))
    piv = np.zeros(n, dtype=np.bool_)
    for i in range(n - 1):
        if abs(d[i]) >= abs(l[i]):
            if d[i] == 0.0:
                d[i] = tiny_piv
            fact = l[i] / d[i]
            l[i] = fact
            d[i + 1] -= fact * u[i]
        else:
            fact = d[i] / l[i]
            d[i] = l[i]
            l[i] = fact
            temp = u[i]
            u[i] = d[i + 1]
            d[i + 1] = temp - fact * d[i + 1]
            if i < n - 2:
                u2[i] = u[i + 1]
                u[i + 1] = -fact * u[i + 1]
            piv[i] = True
    if d[n - 1] == 0.0:
        d[n - 1] = tiny_piv
    y = rhs.copy()
    for i in range(n - 1):
        if piv[i]:
            temp = y[i]
            y[i] = y[i + 1]
            y[i + 1] = temp - l[i] * y[i]
        else:
            y[i + 1] -= l[i] * y[i]
    y[n - 1] /= d[n - 1]
    if n > 1:
        y[n - 2] = (y[n - 2] - u[n - 2] * y[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        y[i] = (y[i] - u[i] * y[i + 1] - u2[i] * y[i + 2]) / d[i]
    return y


@njit(cache=True, nogil=True)
def inverse_iteration(d, e, values, start, cluster_tol):
    """Eigenvectors for the given eigenvalues of the tridiagonal (d, e).

    ``start`` supplies one deterministic starting vector per eigenvalue.
    Vectors of eigenvalues closer than ``cluster_tol`` are re-orthogonalized.
    """
    n = d.shape[0]
    k = values.shape[0]
    out = np.zeros((n, k))
    norm = 0.0
    for i in range(n):
        row = abs(d[i])
        if i > 0:
            row += abs(e[i - 1])
        if i < n - 1:
            row += abs(e[i])
        norm = max(norm, row)
    tiny_piv = _EPS * max(norm, _TINY)
    first_in_cluster = 0
    for j in range(k):
        if j > 0 and values[j] - values[j - 1] > cluster_tol:
            first_in_cluster = j
        shift = values[j]
        v = start[:, j].copy()
        for _ in range(6):
            v = _gt_solve(e, d, e, shift, v, tiny_piv)
            for q in range(first_in_cluster, j):
                dot = 0.0
                for i in range(n):
                    dot += out[i, q] * v[i]
                for i in range(n):
                    v[i] -= dot * out[i, q]
            nrm = 0.0
            for i in range(n):
                nrm += v[i] * v[i]
            nrm = math.sqrt(nrm)
            if nrm == 0.0:
                v = start[:, j].copy()
                continue
            v /= nrm
        for i in range(n):
            out[i, j] = v[i]
    return out
