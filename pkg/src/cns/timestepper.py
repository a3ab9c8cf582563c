"""IMEX time integration of the (psi, w) system.

``w_t = nu * Lap(w) + N(psi)`` with ``Lap(psi) = w``.  Viscosity is treated by
Crank-Nicolson and N by second-order Adams-Bashforth with variable-step
weights.  The first step reduces to forward Euler on N because the initial
history equals the current value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .diagnostics import EnergyReport, report
from .elliptic import ModalSolver
from .grid import CylGrid, build_grid
from .operators import apply_delta_r, apply_dr, apply_dz, nonlinear_terms

DIVERGENCE_FACTOR = 1e6


class UnknownPreset(ValueError):
    pass


class SolverDiverged(RuntimeError):
    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(message or f"solution diverged at t = {t:.6g}")


# initial data


def _quartic_cos(grid, amplitude, mode):
    R, Z = grid.mesh()
    return amplitude * (R - grid.r0) ** 2 * (grid.R0 - R) ** 2 * np.cos(mode * np.pi * Z / grid.L3)


def _octic_cos(grid, amplitude, mode):
    # same peak value as quartic-cos on a unit-width annulus; both wall
    # conditions d_r psi = d_r Lap psi = 0 hold
    R, Z = grid.mesh()
    bump = 16.0 * ((R - grid.r0) * (grid.R0 - R)) ** 4
    return amplitude * bump * np.cos(mode * np.pi * Z / grid.L3)


def _zero(grid, amplitude, mode):
    return grid.zeros()


PRESETS: dict[str, Callable] = {
    "zero": _zero,
    "quartic-cos": _quartic_cos,
    "octic-cos": _octic_cos,
}


def preset_field(name: str, grid: CylGrid, amplitude: float = 1.0, axial_mode: int = 1) -> np.ndarray:
    try:
        fn = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
    return fn(grid, amplitude, axial_mode)


# state and configuration


@dataclass
class RunConfig:
    nu: float
    T_end: float
    dt: Optional[float] = None
    cfl: Optional[float] = None
    r0: float = 1.0
    R0: float = 2.0
    L3: float = math.pi
    Nr: int = 64
    Nz: int = 64
    preset: str = "quartic-cos"
    amplitude: float = 1.0
    axial_mode: int = 1
    report_every: int = 10
    linear_only: bool = False

    def validate(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not self.T_end > 0:
            raise ValueError("T_end must be positive")
        if self.dt is None and self.cfl is None:
            raise ValueError("need dt or cfl")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.dt is None and not (0 < self.cfl <= 1):
            raise ValueError("cfl must lie in (0, 1]")
        if self.report_every < 1:
            raise ValueError("report_every must be >= 1")
        return self

    def grid(self) -> CylGrid:
        return build_grid(self.r0, self.R0, self.L3, self.Nr, self.Nz)


@dataclass
class SolverState:
    t: float
    psi: np.ndarray
    w: np.ndarray
    prev_nonlinear: np.ndarray
    step_index: int = 0
    prev_dt: Optional[float] = None
    w_ref: float = 0.0  # max |w| at t = 0, for the blow-up guard


def _nonlinear(solver: ModalSolver, psi, w):
    N = nonlinear_terms(solver.grid, psi, w)
    # the continuum m = 0 weighted mean vanishes; remove the O(h^2) remainder
    return solver.project_compatible(N)


def initial_state(solver: ModalSolver, psi0: np.ndarray, t0: float = 0.0) -> SolverState:
    """State with ``psi = psi0`` and ``w`` the solver's discrete Laplacian of it."""
    psi = np.array(psi0, dtype=float)
    w = solver.apply_laplacian(psi)
    N0 = _nonlinear(solver, psi, w)
    return SolverState(t=t0, psi=psi, w=w, prev_nonlinear=N0, w_ref=float(np.abs(w).max()))


def initial_state_from_config(cfg: RunConfig, solver: ModalSolver) -> SolverState:
    psi0 = preset_field(cfg.preset, solver.grid, cfg.amplitude, cfg.axial_mode)
    return initial_state(solver, psi0)


def step(state: SolverState, dt: float, nu: float, solver: ModalSolver,
         linear_only: bool = False, forcing: Optional[Callable] = None) -> SolverState:
    """Advance one CN/AB2 step.

    ``forcing(t)`` adds a source to the w equation; it is integrated with
    the trapezoid rule.
    """
    grid = solver.grid
    if linear_only:
        N = np.zeros(grid.shape)
        explicit = N
    else:
        N = _nonlinear(solver, state.psi, state.w)
        if state.prev_dt is None:
            explicit = N
        else:
            om = dt / state.prev_dt
            explicit = (1.0 + 0.5 * om) * N - 0.5 * om * state.prev_nonlinear
    if forcing is not None:
        explicit = explicit + solver.project_compatible(
            0.5 * (forcing(state.t) + forcing(state.t + dt)))
    b = 0.5 * nu * dt
    rhs = state.w + b * solver.apply_laplacian(state.w) + dt * explicit
    w_new = solver.solve_helmholtz(1.0, b, rhs)
    t_new = state.t + dt
    wmax = np.abs(w_new).max()
    if not np.isfinite(wmax) or (state.w_ref > 0 and wmax > DIVERGENCE_FACTOR * state.w_ref):
        raise SolverDiverged(t_new, f"max|w| = {wmax:.3e} exceeded guard at t = {t_new:.6g}")
    psi_new = solver.solve_poisson_neumann(w_new)
    return SolverState(t=t_new, psi=psi_new, w=w_new, prev_nonlinear=N,
                       step_index=state.step_index + 1, prev_dt=dt, w_ref=state.w_ref)


def velocity_bound(grid: CylGrid, psi: np.ndarray) -> float:
    """max |u| with u_r = d_r d_3 psi and u_3 = -Lap_r psi."""
    ur = apply_dz(grid, apply_dr(grid, psi))
    u3 = apply_delta_r(grid, psi)
    return float(np.sqrt(ur**2 + u3**2).max())


def adaptive_dt(grid: CylGrid, psi: np.ndarray, nu: float, cfl: float) -> float:
    hmin = min(grid.dr, grid.dz)
    dt = cfl * hmin**2 / nu
    umax = velocity_bound(grid, psi)
    if umax > 0:
        dt = min(dt, cfl * hmin / umax)
    return dt


def run(cfg: RunConfig, solver: Optional[ModalSolver] = None,
        state: Optional[SolverState] = None,
        on_report: Optional[Callable[[SolverState, EnergyReport], None]] = None,
        forcing: Optional[Callable] = None):
    """Integrate to ``cfg.T_end``; return the final state and the reports.

    Reports are taken at t = 0 and every ``report_every`` steps, plus the
    final state if the step count is not a multiple of the cadence.
    """
    cfg.validate()
    if solver is None:
        solver = ModalSolver(cfg.grid())
    grid = solver.grid
    if state is None:
        state = initial_state_from_config(cfg, solver)
    reports = []

    def emit(s):
        rep = report(grid, s.psi, s.t)
        reports.append(rep)
        if on_report is not None:
            on_report(s, rep)

    emit(state)
    T = cfg.T_end
    if cfg.dt is not None:
        nsteps = max(1, int(math.ceil(T / cfg.dt - 1e-9)))
        dts = [cfg.dt] * nsteps
        dts[-1] = T - cfg.dt * (nsteps - 1)
        if abs(dts[-1] - cfg.dt) < 1e-9 * cfg.dt:
            dts[-1] = cfg.dt
    else:
        dts = None
    k = 0
    while True:
        if dts is not None:
            if k >= len(dts):
                break
            dt = dts[k]
        else:
            if state.t >= T * (1 - 1e-12):
                break
            dt = min(adaptive_dt(grid, state.psi, cfg.nu, cfg.cfl), T - state.t)
        state = step(state, dt, cfg.nu, solver, cfg.linear_only, forcing)
        k += 1
        if k % cfg.report_every == 0:
            emit(state)
    if k % cfg.report_every != 0:
        emit(state)
    return state, reports


__all__ = [
    "PRESETS", "RunConfig", "SolverDiverged", "SolverState", "UnknownPreset",
    "adaptive_dt", "initial_state", "initial_state_from_config", "preset_field",
    "run", "step", "velocity_bound",
]
