"""Finite-difference operators of the reduced axisymmetric formulation.

Radial derivatives use second-order stencils: centered in the interior and
one-sided near the walls.  ``radial_derivative`` builds the stencil for any
derivative order directly from Taylor weights, which the diagnostics use for
third and higher derivatives.  Composing first and second derivative stencils
instead would lose accuracy at the wall nodes.

Axial derivatives are periodic centered differences.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp

from .grid import CylGrid

ORDER = 2


def fd_weights(offsets, k: int) -> np.ndarray:
    """Weights ``c`` with ``sum(c[j] f(x + offsets[j] h)) ~ h**k f^(k)(x)``."""
    offs = np.asarray(offsets, dtype=float)
    n = len(offs)
    if n <= k:
        raise ValueError("need more points than the derivative order")
    A = np.vander(offs, n, increasing=True).T
    b = np.zeros(n)
    b[k] = factorial(k)
    return np.linalg.solve(A, b)


@lru_cache(maxsize=64)
def _radial_stencil(Nr: int, k: int) -> sp.csr_matrix:
    """Unscaled second-order k-th derivative matrix on Nr uniform nodes."""
    half = (k + ORDER - 1) // 2
    nb = k + ORDER  # points in a one-sided closure
    if Nr < max(2 * half + 1, nb):
        raise ValueError(f"too few radial nodes ({Nr}) for derivative order {k}")
    rows, cols, vals = [], [], []
    centered = fd_weights(range(-half, half + 1), k)
    for i in range(Nr):
        if half <= i < Nr - half:
            start, w = i - half, centered
        else:
            start = min(max(i - half, 0), Nr - nb)
            w = fd_weights([j - i for j in range(start, start + nb)], k)
        rows.extend([i] * len(w))
        cols.extend(range(start, start + len(w)))
        vals.extend(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(Nr, Nr))


def radial_derivative(grid: CylGrid, f: np.ndarray, k: int) -> np.ndarray:
    """k-th radial derivative with a direct second-order stencil."""
    if k == 0:
        return np.array(f, dtype=float)
    D = _radial_stencil(grid.Nr, k)
    return np.asarray(D @ f) / grid.dr**k


def apply_dr(grid: CylGrid, f: np.ndarray) -> np.ndarray:
    return radial_derivative(grid, f, 1)


def apply_drr(grid: CylGrid, f: np.ndarray) -> np.ndarray:
    return radial_derivative(grid, f, 2)


def apply_dz(grid: CylGrid, f: np.ndarray) -> np.ndarray:
    return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * grid.dz)


def apply_dzz(grid: CylGrid, f: np.ndarray) -> np.ndarray:
    return (np.roll(f, -1, axis=1) - 2.0 * f + np.roll(f, 1, axis=1)) / grid.dz**2


def apply_delta_r(grid: CylGrid, f: np.ndarray) -> np.ndarray:
    """Radial Laplacian d_rr f + (1/r) d_r f."""
    return apply_drr(grid, f) + apply_dr(grid, f) / grid.rcol


def apply_delta(grid: CylGrid, f: np.ndarray) -> np.ndarray:
    return apply_delta_r(grid, f) + apply_dzz(grid, f)


def radial_cumulative(grid: CylGrid, f: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid integral from the inner wall."""
    f = np.asarray(f, dtype=float)
    g = np.zeros_like(f)
    g[1:] = np.cumsum(0.5 * grid.dr * (f[1:] + f[:-1]), axis=0)
    return g


def nonlinear_terms(grid: CylGrid, psi: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Integrated nonlinearity N so that ``w_t = nu*Lap(w) + N``.

    N = C[Lap_r(psi) * d_r d_3 w] - C[(d_rr w - d_r w / r) * d_r d_3 psi],
    where C is the cumulative radial integral from r0.
    """
    r = grid.rcol
    wr = apply_dr(grid, w)
    a = apply_delta_r(grid, psi) * apply_dz(grid, wr)
    b = (apply_drr(grid, w) - wr / r) * apply_dz(grid, apply_dr(grid, psi))
    return radial_cumulative(grid, a) - radial_cumulative(grid, b)


def nonlinear_terms_differentiated(grid: CylGrid, psi: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Radial derivative of the integrand of :func:`nonlinear_terms`.

    This is the differentiated form of the nonlinearity, kept as a
    cross-check: ``d_r N`` should match it up to O(h^2).
    """
    r = grid.rcol
    wr = apply_dr(grid, w)
    a = apply_delta_r(grid, psi) * apply_dz(grid, wr)
    b = (apply_drr(grid, w) - wr / r) * apply_dz(grid, apply_dr(grid, psi))
    return a - b
