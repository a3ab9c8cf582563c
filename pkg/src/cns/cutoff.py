"""Radial cutoff sequence, initial-data projection and the domain-expansion study.

The n-th cutoff equals one on ``[1/n, n]`` and vanishes outside
``[1/(2n), 2n]``, with quintic smoothstep ramps in between.  On both ramps
``r * d_r chi`` is ``(1 + t) S'(t)`` in the ramp coordinate ``t``, so the
bound on ``r |d_r chi|`` does not depend on n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import PsiDerivatives
from .elliptic import ModalSolver
from .grid import CylGrid, build_grid, weighted_integral
from .operators import radial_cumulative
from .timestepper import RunConfig, SolverDiverged, initial_state, run


class InsufficientLevels(ValueError):
    pass


class LevelFailed(RuntimeError):
    """A solver error raised while running one expansion level."""

    def __init__(self, n: int, cause: Exception):
        self.n = n
        super().__init__(f"level n={n}: {cause}")


def smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def smoothstep5_prime(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 30.0 * t**2 * (1.0 - t) ** 2, 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    """Cutoff ``chi^n`` with quintic (C^2) ramps."""

    n: int
    degree: int = 5

    @property
    def support(self):
        return 1.0 / (2 * self.n), 2.0 * self.n

    @property
    def plateau(self):
        return 1.0 / self.n, float(self.n)

    def _ramps(self, r):
        n = self.n
        a = 1.0 / (2 * n)
        t_in = (r - a) / a  # inner ramp [1/(2n), 1/n] has width 1/(2n)
        t_out = (r - n) / n  # outer ramp [n, 2n] has width n
        return a, t_in, t_out

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        _, t_in, t_out = self._ramps(r)
        return np.where(r <= self.n, smoothstep5(t_in), 1.0 - smoothstep5(t_out))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        a, t_in, t_out = self._ramps(r)
        return np.where(r <= self.n, smoothstep5_prime(t_in) / a,
                        -smoothstep5_prime(t_out) / self.n)


def build_chi(n: int) -> CutoffProfile:
    if int(n) != n or n < 1:
        raise ValueError(f"cutoff index must be an integer >= 1, got {n}")
    return CutoffProfile(int(n))


def ramp_slope_bound(chi: CutoffProfile, samples: int = 100_000) -> float:
    """Dense-sample estimate of ``sup r |d_r chi|`` over both ramps."""
    lo, hi = chi.support
    p0, p1 = chi.plateau
    r = np.concatenate([np.linspace(lo, p0, samples), np.linspace(p1, hi, samples)])
    return float(np.max(r * np.abs(chi.derivative(r))))


def grid_for_level(n: int, dr: float, L3: float, Nz: int) -> CylGrid:
    """Grid on ``[1/(2n), 2n]`` with radial spacing ``dr``."""
    r0, R0 = 1.0 / (2 * n), 2.0 * n
    cells = (R0 - r0) / dr
    if abs(cells - round(cells)) > 1e-9 * cells:
        raise ValueError(f"dr={dr} does not divide the level-{n} annulus")
    return build_grid(r0, R0, L3, int(round(cells)) + 1, Nz)


@dataclass
class Projection:
    """Projected initial data with the cut and uncut ``d_r Lap psi0``."""

    psi: np.ndarray
    g: np.ndarray
    d: np.ndarray
    chi: np.ndarray = field(repr=False)


def dr_lap(grid: CylGrid, psi: np.ndarray) -> np.ndarray:
    """``d_r Lap psi`` by direct radial stencils."""
    return PsiDerivatives(grid, psi).dr_w


def project_initial(grid: CylGrid, psi0: np.ndarray, chi: CutoffProfile,
                    solver: ModalSolver | None = None) -> Projection:
    """Cut ``d_r Lap psi0`` by ``chi`` and rebuild psi from it.

    ``Lap psi0^n`` is the cumulative radial integral of the cut derivative;
    its weighted mean is then removed so the Neumann problem is solvable.
    Both wall conditions hold because ``chi`` vanishes at the walls.
    """
    solver = solver or ModalSolver(grid)
    d = dr_lap(grid, psi0)
    c = chi(grid.r_nodes)[:, None]
    g = c * d
    lap = radial_cumulative(grid, g)
    lap = solver.project_compatible(lap)
    psi = solver.solve_poisson_neumann(lap)
    return Projection(psi=psi, g=g, d=d, chi=np.broadcast_to(c, grid.shape))


def cutoff_inequalities(grid: CylGrid, proj: Projection) -> dict:
    """Both sides of the two cutoff bounds, p = +1 and p = -1."""
    out = {}
    for p in (1, -1):
        lhs = weighted_integral(grid, proj.g**2, p)
        rhs = weighted_integral(grid, proj.d**2, p)
        out[p] = (lhs, rhs)
    return out


def gaussian_initial(grid: CylGrid, amplitude: float = 1.0, mode: int = 1) -> np.ndarray:
    R, Z = grid.mesh()
    return amplitude * R**2 * np.exp(-(R**2)) * np.cos(mode * np.pi * Z / grid.L3)


def restrict(big: CylGrid, f: np.ndarray, small: CylGrid) -> np.ndarray:
    """Rows of ``f`` on ``big`` that coincide with the nodes of ``small``."""
    i0 = int(round((small.r0 - big.r0) / big.dr))
    if not np.allclose(big.r_nodes[i0:i0 + small.Nr], small.r_nodes, atol=1e-12):
        raise ValueError("grids are not node aligned")
    return f[i0:i0 + small.Nr]


def difference_norms(grid: CylGrid, dpsi: np.ndarray):
    """L2 norm and H1 seminorm of the velocity of ``dpsi`` over ``grid``.

    Both are gauge invariant: they only see ``Lap_r``, ``d_r d_3`` and
    ``d_r Lap`` of the stream function.
    """
    d = PsiDerivatives(grid, dpsi)
    l2 = 2.0 * math.pi * weighted_integral(grid, d.lap_r_psi**2 + d.dr_dz_psi**2, 1)
    h1 = 2.0 * math.pi * weighted_integral(grid, d.dr_w**2, 1)
    return math.sqrt(max(l2, 0.0)), math.sqrt(max(h1, 0.0))


@dataclass
class ExpansionRow:
    n: int
    n_next: int
    l2: float
    h1: float

    def as_row(self) -> dict:
        return {"n": self.n, "n_next": self.n_next, "l2_diff": self.l2, "h1_diff": self.h1}


def expansion_study(base: RunConfig, levels: int, n0: int = 1, dr: float = 1.0 / 32,
                    amplitude: float = 1.0, initial=gaussian_initial) -> list[ExpansionRow]:
    """Run the solver on nested annuli and tabulate successive differences.

    Level k uses ``n = n0 * 2**k`` on ``[1/(2n), 2n]`` with fixed ``dr`` and
    the axial settings of ``base``.  ``base.r0``, ``base.R0`` and ``base.Nr``
    are ignored.
    """
    if levels < 2:
        raise InsufficientLevels(f"expansion study needs at least 2 levels, got {levels}")
    finals = []
    for k in range(levels):
        n = n0 * 2**k
        grid = grid_for_level(n, dr, base.L3, base.Nz)
        solver = ModalSolver(grid)
        proj = project_initial(grid, initial(grid, amplitude, base.axial_mode), build_chi(n), solver)
        cfg = RunConfig(nu=base.nu, T_end=base.T_end, dt=base.dt, cfl=base.cfl,
                        r0=grid.r0, R0=grid.R0, L3=grid.L3, Nr=grid.Nr, Nz=grid.Nz,
                        report_every=10**9, linear_only=base.linear_only)
        try:
            state, _ = run(cfg, solver=solver, state=initial_state(solver, proj.psi))
        except (SolverDiverged, FloatingPointError, ValueError) as exc:
            raise LevelFailed(n, exc) from exc
        finals.append((n, grid, state.psi))
    rows = []
    for (n, g, psi), (m, G, Psi) in zip(finals, finals[1:]):
        l2, h1 = difference_norms(g, psi - restrict(G, Psi, g))
        rows.append(ExpansionRow(n, m, l2, h1))
    return rows


def strictly_decreasing(rows: list[ExpansionRow], slack: float = 0.1, key: str = "h1") -> bool:
    """Successive differences decrease, allowing ``slack`` relative growth."""
    vals = [getattr(r, key) for r in rows]
    return all(b <= a * (1.0 + slack) for a, b in zip(vals, vals[1:]))


__all__ = [
    "CutoffProfile", "ExpansionRow", "InsufficientLevels", "LevelFailed", "Projection",
    "build_chi", "cutoff_inequalities", "difference_norms", "expansion_study",
    "gaussian_initial", "grid_for_level", "project_initial", "ramp_slope_bound",
    "restrict", "strictly_decreasing",
]
