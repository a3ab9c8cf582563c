"""Modal Poisson and Helmholtz solvers with Neumann walls.

The radial part is a conservative (finite-volume) discretization of
``(1/r) d_r (r d_r .)`` on the node grid with zero-flux walls.  Its interior
rows coincide with the centered stencil of ``apply_delta_r``.  At the walls
the half-cell flux balance replaces the one-sided closure.  This operator is
exactly symmetric in the trapezoid r-weighted inner product, and those
weights span its left null space, so the Neumann solvability condition is
precisely ``weighted_integral(w, +1) == 0``.

The axial direction is diagonalized by a real FFT using the
finite-difference symbol ``(2 - 2 cos(2 pi m / Nz)) / dz**2``.  Each mode then
needs one tridiagonal solve, done for all modes at once by a vectorized
Thomas sweep with precomputed factors.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .grid import CylGrid, weighted_integral
from .operators import apply_dzz

COMPAT_TOL = 1e-8


class IncompatibleRHS(ValueError):
    """Neumann Poisson right-hand side has a nonzero weighted mean."""


def neumann_radial_coefficients(grid: CylGrid):
    """Sub, main and super diagonals of the radial Neumann operator."""
    h, r, N = grid.dr, grid.r_nodes, grid.Nr
    lo, di, up = np.zeros(N), np.zeros(N), np.zeros(N)
    ri = r[1:-1]
    lo[1:-1] = 1.0 / h**2 - 1.0 / (2.0 * ri * h)
    di[1:-1] = -2.0 / h**2
    up[1:-1] = 1.0 / h**2 + 1.0 / (2.0 * ri * h)
    c0 = 2.0 * (r[0] + 0.5 * h) / (r[0] * h**2)
    c1 = 2.0 * (r[-1] - 0.5 * h) / (r[-1] * h**2)
    di[0], up[0] = -c0, c0
    di[-1], lo[-1] = -c1, c1
    return lo, di, up


def _thomas_factor(a, b, c):
    """LU factors of a batch of tridiagonal systems (columns are systems)."""
    n = b.shape[0]
    cp = np.zeros_like(b)
    inv = np.empty_like(b)
    inv[0] = 1.0 / b[0]
    cp[0] = c[0] * inv[0]
    for i in range(1, n):
        inv[i] = 1.0 / (b[i] - a[i] * cp[i - 1])
        if i < n - 1:
            cp[i] = c[i] * inv[i]
    return a, cp, inv


def _thomas_solve(factors, d):
    a, cp, inv = factors
    n = d.shape[0]
    y = np.empty_like(d)
    y[0] = d[0] * inv[0]
    for i in range(1, n):
        y[i] = (d[i] - a[i] * y[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        y[i] -= cp[i] * y[i + 1]
    return y


class ModalSolver:
    """Per-axial-mode factorizations of the Neumann Laplacian."""

    def __init__(self, grid: CylGrid):
        self.grid = grid
        self.lo, self.di, self.up = neumann_radial_coefficients(grid)
        m = np.arange(grid.Nz // 2 + 1)
        self.k2 = (2.0 - 2.0 * np.cos(2.0 * np.pi * m / grid.Nz)) / grid.dz**2
        self.null_weights = grid.quad_w_r * grid.r_nodes
        self._mass = weighted_integral(grid, np.ones(grid.shape), 1)
        M = len(m)
        ones = np.ones(M)
        # modes m >= 1: (L_r - k2) is nonsingular
        a = self.lo[:, None] * ones
        b = self.di[:, None] - self.k2[None, :]
        c = self.up[:, None] * ones
        self._poisson = _thomas_factor(a[:, 1:], b[:, 1:], c[:, 1:])
        # m = 0: pin psi[0] = 0 and drop the first row (redundant for
        # compatible data because the left null vector has no zero entries)
        ab = np.zeros((3, grid.Nr - 1))
        ab[0, 1:] = self.up[1:-1]
        ab[1, :] = self.di[1:]
        ab[2, :-1] = self.lo[2:]
        self._pinned = ab
        self._helmholtz = {}

    # forward operators

    def apply_radial(self, f: np.ndarray) -> np.ndarray:
        out = self.di[:, None] * f
        out[1:] += self.lo[1:, None] * f[:-1]
        out[:-1] += self.up[:-1, None] * f[1:]
        return out

    def apply_laplacian(self, f: np.ndarray) -> np.ndarray:
        """The discrete Laplacian this solver inverts."""
        return self.apply_radial(f) + apply_dzz(self.grid, f)

    def radial_matrix(self) -> np.ndarray:
        """Dense radial operator, for oracles and tests."""
        return np.diag(self.di) + np.diag(self.lo[1:], -1) + np.diag(self.up[:-1], 1)

    # helpers

    def weighted_mean(self, f: np.ndarray) -> float:
        return weighted_integral(self.grid, f, 1) / self._mass

    def compatibility_defect(self, w: np.ndarray) -> float:
        """Relative size of the weighted mean of ``w``."""
        scale = weighted_integral(self.grid, np.abs(w), 1)
        if scale == 0.0:
            return 0.0
        return abs(weighted_integral(self.grid, w, 1)) / scale

    def project_compatible(self, w: np.ndarray) -> np.ndarray:
        return w - self.weighted_mean(w)

    # solves

    def solve_poisson_neumann(self, w: np.ndarray, gauge: str = "ZeroMean",
                              tol: float = COMPAT_TOL) -> np.ndarray:
        """Solve ``Lap psi = w`` with zero-flux walls and periodic x3."""
        if gauge != "ZeroMean":
            raise ValueError(f"unsupported gauge {gauge!r}")
        w = np.asarray(w, dtype=float)
        defect = self.compatibility_defect(w)
        if defect > tol:
            raise IncompatibleRHS(
                f"weighted mean of right-hand side is {defect:.3e} relative (tol {tol:.0e})"
            )
        w = self.project_compatible(w)
        F = np.fft.rfft(w, axis=1)
        X = np.zeros_like(F)
        X[:, 1:] = _thomas_solve(self._poisson, F[:, 1:])
        x0 = np.zeros(self.grid.Nr)
        x0[1:] = sla.solve_banded((1, 1), self._pinned, F[1:, 0].real)
        X[:, 0] = x0
        psi = np.fft.irfft(X, n=self.grid.Nz, axis=1)
        return psi - self.weighted_mean(psi)

    def _helmholtz_factors(self, a: float, b: float):
        key = (a, b)
        fac = self._helmholtz.get(key)
        if fac is None:
            if len(self._helmholtz) > 8:
                self._helmholtz.clear()
            M = len(self.k2)
            ones = np.ones(M)
            fac = _thomas_factor(
                -b * self.lo[:, None] * ones,
                (a - b * self.di)[:, None] + b * self.k2[None, :],
                -b * self.up[:, None] * ones,
            )
            self._helmholtz[key] = fac
        return fac

    def solve_helmholtz(self, a: float, b: float, f: np.ndarray,
                        bc: str = "NeumannWalls") -> np.ndarray:
        """Solve ``(a - b Lap) x = f`` with zero-flux walls."""
        if bc != "NeumannWalls":
            raise ValueError(f"unsupported boundary condition {bc!r}")
        if not (a > 0 and b >= 0):
            raise ValueError(f"need a > 0 and b >= 0, got a={a}, b={b}")
        F = np.fft.rfft(np.asarray(f, dtype=float), axis=1)
        X = _thomas_solve(self._helmholtz_factors(float(a), float(b)), F)
        return np.fft.irfft(X, n=self.grid.Nz, axis=1)


def wall_flux_residual(grid: CylGrid, f: np.ndarray) -> float:
    """Largest one-sided second-order d_r f at either wall."""
    h = grid.dr
    d0 = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    d1 = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return float(max(np.abs(d0).max(), np.abs(d1).max()))
