"""Numerical kernels: eigensolvers, Bessel functions, quadrature, matrix exponential."""

from .bessel import (bessel_i, bessel_i_family, bessel_i_orders, bessel_j,
                     bessel_j_family, bessel_j_orders)
from .dense import (HermitianDense, eig_hermitian, expm_hermitian,
                    hermitian_function, tridiagonalize)
from .quadrature import QuadResult, gauss_legendre_panels, quadrature
from .tridiagonal import (EigenDecomposition, SymTridiagonal, bisect_eigenvalues,
                          count_below, eig_sym_tridiagonal, gershgorin_bounds)

__all__ = [
    "SymTridiagonal", "HermitianDense", "EigenDecomposition",
    "eig_sym_tridiagonal", "eig_hermitian", "expm_hermitian", "hermitian_function",
    "tridiagonalize", "bisect_eigenvalues", "count_below", "gershgorin_bounds",
    "bessel_j", "bessel_i", "bessel_j_family", "bessel_i_family",
    "bessel_j_orders", "bessel_i_orders",
    "quadrature", "QuadResult", "gauss_legendre_panels",
]
