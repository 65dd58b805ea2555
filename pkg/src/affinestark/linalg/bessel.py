"""Integer-order Bessel functions J_n and I_n by Miller's backward recurrence."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError

MAX_ORDER = 500
MAX_ARG = 1e4
_RESCALE = 1e100


def _check(order, x):
    if not float(order).is_integer():
        raise DomainError(f"order must be an integer, got {order}")
    if abs(order) > MAX_ORDER:
        raise DomainError(f"|order| must be <= {MAX_ORDER}, got {order}")
    if not math.isfinite(x) or abs(x) > MAX_ARG:
        raise DomainError(f"|x| must be <= {MAX_ARG:g}, got {x}")


def _start_order(n_max: int, x: float) -> int:
    """Starting order for the backward sweep.

    Base offset of 40 above max(n, |x|); for large arguments an extra margin
    proportional to the |x|^(1/3) width of the turning-point region is added.
    """
    ax = abs(x)
    extra = int(math.ceil(6.0 * ax ** (1.0 / 3.0))) if ax > 50.0 else 0
    return max(n_max, int(math.ceil(ax))) + 40 + extra


def bessel_j_family(x: float, n_max: int) -> np.ndarray:
    """J_0(x) .. J_{n_max}(x), normalized so that Σ_s J_s(x)² = 1."""
    x = float(x)
    _check(n_max, x)
    n_max = int(n_max)
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    sign_x = -1.0 if x < 0 else 1.0
    ax = abs(x)
    start = _start_order(n_max, ax)
    vals = np.zeros(start + 2)
    vals[start + 1] = 0.0
    vals[start] = 1.0
    for k in range(start, 0, -1):
        vals[k - 1] = (2.0 * k / ax) * vals[k] - vals[k + 1]
        if abs(vals[k - 1]) > _RESCALE:
            vals[k - 1:] /= _RESCALE
    sq = vals[0] ** 2 + 2.0 * np.sum(vals[1:] ** 2)
    # Σ J_s² = 1 fixes the magnitude; J_0 + 2 Σ J_2k = 1 fixes the sign
    lin = vals[0] + 2.0 * np.sum(vals[2::2])
    norm = math.copysign(math.sqrt(sq), lin)
    out[:] = vals[: n_max + 1] / norm
    if sign_x < 0:
        out[1::2] *= -1.0
    return out


def bessel_i_family(x: float, n_max: int, scaled: bool = False) -> np.ndarray:
    """I_0(x) .. I_{n_max}(x) normalized by Σ_s I_s(x) = e^x.

    With ``scaled=True`` the values are multiplied by e^{-|x|}.
    """
    x = float(x)
    _check(n_max, x)
    n_max = int(n_max)
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    ax = abs(x)
    start = _start_order(n_max, ax)
    vals = np.zeros(start + 2)
    vals[start] = 1.0
    for k in range(start, 0, -1):
        vals[k - 1] = (2.0 * k / ax) * vals[k] + vals[k + 1]
        if abs(vals[k - 1]) > _RESCALE:
            vals[k - 1:] /= _RESCALE
    total = vals[0] + 2.0 * np.sum(vals[1:])
    out[:] = vals[: n_max + 1] / total
    if not scaled:
        if ax > 700.0:
            raise DomainError(f"I_n({x}) overflows double precision; use scaled=True")
        out *= math.exp(ax)
    if x < 0:
        out[1::2] *= -1.0
    return out


def bessel_j(order: int, x: float) -> float:
    """Bessel function of the first kind J_order(x) for integer order."""
    _check(order, float(x))
    n = abs(int(order))
    val = bessel_j_family(float(x), n)[n]
    if order < 0 and n % 2:
        val = -val
    return float(val)


def bessel_i(order: int, x: float, scaled: bool = False) -> float:
    """Modified Bessel function I_order(x) for integer order (I_{-n} = I_n)."""
    _check(order, float(x))
    n = abs(int(order))
    return float(bessel_i_family(float(x), n, scaled=scaled)[n])


def bessel_j_orders(orders, x: float) -> np.ndarray:
    """J_n(x) for an array of (possibly negative) integer orders."""
    orders = np.asarray(orders, dtype=int)
    if orders.size == 0:
        return np.zeros(0)
    fam = bessel_j_family(x, int(np.max(np.abs(orders))))
    vals = fam[np.abs(orders)]
    odd_neg = (orders < 0) & (orders % 2 != 0)
    vals[odd_neg] *= -1.0
    return vals


def bessel_i_orders(orders, x: float, scaled: bool = False) -> np.ndarray:
    """I_n(x) for an array of integer orders."""
    orders = np.asarray(orders, dtype=int)
    if orders.size == 0:
        return np.zeros(0)
    fam = bessel_i_family(x, int(np.max(np.abs(orders))), scaled=scaled)
    return fam[np.abs(orders)]
