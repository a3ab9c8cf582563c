"""Manufactured solution for the forced (psi, w) system.

The prescribed stream function is ``psi = a(t) p(r) cos(x3)`` with the bump
``p = peak * ((r - r0)(R0 - r) / half**2)**power``.  Both wall conditions
hold for any power >= 3; the default 6 also zeroes the third derivative of
w at the walls, which keeps the finite-volume wall rows second order.
Writing ``q = Lap_r p - p`` gives ``w = a q cos(x3)``, and the
integrated nonlinearity is ``-(a**2 / 2) M(r) sin(2 x3)`` with
``M = int_{r0}^r [Lap_r p q' - (q'' - q'/r) p']``.  ``M`` is integrated by
Gauss-Legendre quadrature on each grid cell, so the forcing is exact to
rounding at the nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .elliptic import ModalSolver
from .grid import CylGrid, build_grid
from .operators import nonlinear_terms
from .timestepper import RunConfig, initial_state, run


def oscillating_amplitude(omega: float = 2.0):
    """``a(t) = 1 + sin(omega t) / 2`` and its derivative."""
    return (lambda t: 1.0 + 0.5 * np.sin(omega * t),
            lambda t: 0.5 * omega * np.cos(omega * t))


@dataclass
class Manufactured:
    r0: float
    R0: float
    nu: float
    omega: float = 2.0
    power: int = 6
    peak: float = 1.0 / 16.0
    linear: bool = False

    def __post_init__(self):
        self.a, self.da = oscillating_amplitude(self.omega)
        # mapped domain keeps the coefficients O(1)
        x = Polynomial.identity(domain=[self.r0, self.R0])
        half = 0.5 * (self.R0 - self.r0)
        self.p = self.peak * ((x - self.r0) * (self.R0 - x) / half**2) ** self.power
        self._dp = [self.p.deriv(k) for k in range(6)]

    # radial profiles

    def _lap_r(self, d, r, k=0):
        """k-th derivative of Lap_r applied to the profile with derivatives d."""
        if k == 0:
            return d[2](r) + d[1](r) / r
        if k == 1:
            return d[3](r) + d[2](r) / r - d[1](r) / r**2
        if k == 2:
            return d[4](r) + d[3](r) / r - 2 * d[2](r) / r**2 + 2 * d[1](r) / r**3
        raise ValueError(k)

    def q(self, r, k=0):
        return self._lap_r(self._dp, r, k) - self._dp[k](r)

    def q_lap(self, r):
        return self.q(r, 2) + self.q(r, 1) / r

    def m(self, r):
        return self._lap_r(self._dp, r) * self.q(r, 1) - (self.q(r, 2) - self.q(r, 1) / r) * self._dp[1](r)

    def M(self, r_nodes, order: int = 10):
        x, wts = np.polynomial.legendre.leggauss(order)
        a, b = r_nodes[:-1], r_nodes[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        cells = (self.m(mid[:, None] + half[:, None] * x[None, :]) * wts).sum(axis=1) * half
        return np.concatenate([[0.0], np.cumsum(cells)])

    # fields

    def psi(self, grid: CylGrid, t: float) -> np.ndarray:
        R, Z = grid.mesh()
        return self.a(t) * self.p(R) * np.cos(Z)

    def w(self, grid: CylGrid, t: float) -> np.ndarray:
        R, Z = grid.mesh()
        return self.a(t) * self.q(R) * np.cos(Z)

    def forcing(self, grid: CylGrid) -> Callable[[float], np.ndarray]:
        r = grid.r_nodes
        q, qL = self.q(r)[:, None], self.q_lap(r)[:, None]
        Mr = np.zeros((grid.Nr, 1)) if self.linear else self.M(r)[:, None]
        cz, s2z = np.cos(grid.z_nodes)[None, :], np.sin(2.0 * grid.z_nodes)[None, :]
        nu = self.nu

        def F(t):
            a, da = self.a(t), self.da(t)
            return (da * q - nu * a * (qL - q)) * cz + 0.5 * a**2 * Mr * s2z

        return F

    def discrete_forcing(self, solver: ModalSolver) -> Callable[[float], np.ndarray]:
        """Forcing built from the solver's own spatial operators.

        The sampled ``psi`` then solves the semi-discrete system exactly, so
        the remaining error is the time-stepping error alone.  The
        nonlinearity is quadratic, hence ``N(a P, a W) = a**2 N(P, W)``.
        """
        grid = solver.grid
        P = self.psi(grid, 0.0) / self.a(0.0)
        W = solver.apply_laplacian(P)
        LW = solver.apply_laplacian(W)
        NP = 0.0 if self.linear else solver.project_compatible(nonlinear_terms(grid, P, W))
        nu = self.nu

        def F(t):
            a = self.a(t)
            return self.da(t) * W - nu * a * LW - a**2 * NP

        return F


def manufactured_error(N: int, dt: float, T: float = 1.0, nu: float = 0.5,
                       r0: float = 1.0, R0: float = 2.0, Nz: int | None = None,
                       semi_discrete: bool = False, **kw) -> float:
    """Relative max error of psi at ``T`` on an ``(N + 1) x Nz`` grid (``Nz = N`` by default).

    The axial period is ``2 pi`` so that ``cos(x3)`` is a single mode.  With
    ``semi_discrete`` the forcing comes from the discrete operators and the
    error measures time stepping only.
    """
    Nz = Nz or N
    grid = build_grid(r0, R0, math.pi, N + 1, Nz)
    ms = Manufactured(r0, R0, nu, **kw)
    solver = ModalSolver(grid)
    cfg = RunConfig(nu=nu, T_end=T, dt=dt, r0=r0, R0=R0, L3=math.pi, Nr=N + 1, Nz=Nz,
                    report_every=10**9, linear_only=ms.linear)
    state = initial_state(solver, ms.psi(grid, 0.0))
    forcing = ms.discrete_forcing(solver) if semi_discrete else ms.forcing(grid)
    state, _ = run(cfg, solver=solver, state=state, forcing=forcing)
    exact = ms.psi(grid, state.t)
    return float(np.abs(state.psi - exact).max() / np.abs(exact).max())


def observed_orders(errors) -> list[float]:
    e = np.asarray(errors, dtype=float)
    return [float(x) for x in np.log2(e[:-1] / e[1:])]
