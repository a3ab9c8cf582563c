"""Energy functionals, identity residuals and inequality checks.

Every functional is a weighted integral of products of derivatives of psi.
Radial derivatives up to fifth order are taken with direct second-order
stencils and assembled by the chain rule; for example
``d_r Lap_r f = f''' + f''/r - f'/r**2``.  Axial derivatives are applied to
psi before the radial ones.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from functools import cached_property

import numpy as np

from .grid import CylGrid, weighted_integral
from .operators import apply_dz, apply_dzz, radial_derivative

RESIDUAL_FLOOR = 1e-14


class DecayViolation(ValueError):
    """Profile does not decay at the ends of the sample interval."""


# chain-rule combinations of radial derivatives f[k] = d_r^k f


def _lap_r(f, r):
    return f[2] + f[1] / r


def _dr_lap_r(f, r):
    return f[3] + f[2] / r - f[1] / r**2


def _drr_lap_r(f, r):
    return f[4] + f[3] / r - 2.0 * f[2] / r**2 + 2.0 * f[1] / r**3


def _lap_r2(f, r):
    return f[4] + 2.0 * f[3] / r - f[2] / r**2 + f[1] / r**3


def _dr_lap_r2(f, r):
    return f[5] + 2.0 * f[4] / r - 3.0 * f[3] / r**2 + 3.0 * f[2] / r**3 - 3.0 * f[1] / r**4


class _Radial:
    """Lazily evaluated radial derivatives of one field."""

    def __init__(self, grid, f):
        self.grid, self.f, self._d = grid, f, {}

    def __getitem__(self, k):
        if k not in self._d:
            self._d[k] = radial_derivative(self.grid, self.f, k)
        return self._d[k]


class PsiDerivatives:
    """Derived fields of psi used by the functionals."""

    def __init__(self, grid: CylGrid, psi: np.ndarray):
        self.grid = grid
        self.r = grid.rcol
        self.psi = np.asarray(psi, dtype=float)
        self.P = _Radial(grid, self.psi)
        self.Q = _Radial(grid, apply_dzz(grid, self.psi))  # psi_33
        self.S = _Radial(grid, apply_dzz(grid, apply_dzz(grid, self.psi)))  # psi_3333

    @cached_property
    def lap_r_psi(self):
        return _lap_r(self.P, self.r)

    @cached_property
    def dr_dz_psi(self):
        return apply_dz(self.grid, self.P[1])

    @cached_property
    def w(self):
        return self.lap_r_psi + self.Q.f

    @cached_property
    def dr_w(self):
        return _dr_lap_r(self.P, self.r) + self.Q[1]

    @cached_property
    def drr_w(self):
        return _drr_lap_r(self.P, self.r) + self.Q[2]

    @cached_property
    def dr_dz_w(self):
        return apply_dz(self.grid, self.dr_w)

    @cached_property
    def lap_r_w(self):
        return _lap_r2(self.P, self.r) + _lap_r(self.Q, self.r)

    @cached_property
    def dr_lap2_psi(self):
        return _dr_lap_r2(self.P, self.r) + 2.0 * _dr_lap_r(self.Q, self.r) + self.S[1]


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E0: float
    D1: float
    Ew: float
    Dw: float
    D2: float
    E3: float
    linf_dr_dz_psi: float

    @property
    def E1(self) -> float:
        return self.D1

    def as_row(self) -> dict:
        row = asdict(self)
        row["E1"] = self.E1
        return row

    @staticmethod
    def columns() -> list[str]:
        names = [f.name for f in fields(EnergyReport)]
        return names[:5] + ["E1"] + names[5:]


def report(grid: CylGrid, psi: np.ndarray, t: float = 0.0) -> EnergyReport:
    d = PsiDerivatives(grid, psi)
    wi = lambda f, p: weighted_integral(grid, f, p)  # noqa: E731
    r = d.r
    E0 = wi(d.lap_r_psi**2 + d.dr_dz_psi**2, 1)
    D1 = wi(d.dr_w**2, 1)
    Ew = wi(d.dr_w**2, -1)
    Dw = wi((d.drr_w - d.dr_w / r) ** 2 + d.dr_dz_w**2, -1)
    D2 = wi(d.lap_r_w**2 + d.dr_dz_w**2, 1)
    E3 = wi(d.dr_lap2_psi**2, 1)
    linf = float(np.abs(d.dr_dz_psi).max())
    return EnergyReport(float(t), E0, D1, Ew, Dw, D2, E3, linf)


def _series(series, attr):
    return np.array([getattr(s, attr) for s in series], dtype=float)


def _check_series(series):
    if len(series) < 2:
        raise ValueError("need at least two reports")
    t = _series(series, "t")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("report times must increase")
    return dt


def identity_residual_L2(series, nu: float) -> np.ndarray:
    """Normalized residual of dE0/dt + 2 nu D1 = 0 on each report interval.

    The dissipation is averaged over the interval ends, which is second
    order in time like the Crank-Nicolson update.
    """
    dt = _check_series(series)
    E0, D1 = _series(series, "E0"), _series(series, "D1")
    diss = nu * (D1[1:] + D1[:-1])  # 2 nu * mean
    return (np.diff(E0) / dt + diss) / np.maximum(diss, RESIDUAL_FLOOR)


def identity_residual_weighted(series, nu: float) -> np.ndarray:
    """Normalized residual of (1/2) dEw/dt + nu Dw = 0 on each interval."""
    dt = _check_series(series)
    Ew, Dw = _series(series, "Ew"), _series(series, "Dw")
    diss = 0.5 * nu * (Dw[1:] + Dw[:-1])
    return (0.5 * np.diff(Ew) / dt + diss) / np.maximum(diss, RESIDUAL_FLOOR)


def ew_monotone(series, dt: float, h: float) -> np.ndarray:
    """Per-interval flags for Ew(t_{k+1}) <= Ew(t_k) (1 + 10 (dt^2 + h^2))."""
    Ew = _series(series, "Ew")
    return Ew[1:] <= Ew[:-1] * (1.0 + 10.0 * (dt**2 + h**2))


def gronwall_check(series, slack: float = 0.1) -> np.ndarray:
    """Flags for E1(t) <= E1(0) exp(2 Ew(0) t) (1 + slack)."""
    t, E1 = _series(series, "t"), _series(series, "D1")
    bound = E1[0] * np.exp(2.0 * series[0].Ew * (t - t[0])) * (1.0 + slack)
    return E1 <= bound


def time_derivative_functional(grid: CylGrid, psi_prev, psi, dt: float) -> float:
    """Backward-difference estimate of the integral of (d_r Lap psi_t)^2 r."""
    d = PsiDerivatives(grid, (np.asarray(psi) - np.asarray(psi_prev)) / dt)
    return weighted_integral(grid, d.dr_w**2, 1)


def check_linf_interpolation(f, h: float, decay_tol: float = 1e-6):
    """Check max|f| <= sqrt(2) (||f'|| ||f||)^(1/2) on a uniform sample.

    Norms use the rectangle rule with forward differences for f'.  Returns
    ``(lhs, rhs, ok)`` with ``ok = lhs <= rhs * (1 + 10 h)``.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size < 3:
        raise ValueError("need a 1D profile with at least 3 samples")
    lhs = float(np.abs(f).max())
    if max(abs(f[0]), abs(f[-1])) > decay_tol * lhs:
        raise DecayViolation(
            f"endpoint magnitude {max(abs(f[0]), abs(f[-1])):.3e} exceeds {decay_tol:g} * max|f|"
        )
    if lhs == 0.0:
        return 0.0, 0.0, True
    g = f / lhs  # both sides are 1-homogeneous; scaling avoids underflow
    nf = math.sqrt(h * math.fsum(g**2))
    nd = math.sqrt(h * math.fsum((np.diff(g) / h) ** 2))
    rhs = lhs * math.sqrt(2.0) * math.sqrt(nd * nf)
    return lhs, rhs, bool(lhs <= rhs * (1.0 + 10.0 * h))


def _rel(a, b):
    return abs(a - b) / max(abs(a), RESIDUAL_FLOOR)


def observation_terms(grid: CylGrid, psi: np.ndarray) -> dict:
    """Both sides of the two integral decompositions."""
    d = PsiDerivatives(grid, psi)
    r = d.r
    wi = lambda f, p: weighted_integral(grid, f, p)  # noqa: E731
    P, Q = d.P, d.Q
    h3_lhs = wi(d.dr_w**2, 1)
    h3_rhs = (wi(_dr_lap_r(P, r) ** 2, 1) + wi(Q[1] ** 2, 1)
              + 2.0 * wi(apply_dz(grid, d.lap_r_psi) ** 2, 1))
    h4_lhs = wi(d.lap_r_w**2, 1)
    h4_rhs = (wi(_lap_r2(P, r) ** 2, 1) + wi(Q[2] ** 2, 1) + wi(Q[1] ** 2, -1)
              + 2.0 * wi(apply_dz(grid, _dr_lap_r(P, r)) ** 2, 1))
    return {"H3": (h3_lhs, h3_rhs), "H4": (h4_lhs, h4_rhs)}


def check_observation_identities(grid: CylGrid, psi: np.ndarray) -> tuple[float, float]:
    """Relative residuals of the H3 and H4 decompositions."""
    terms = observation_terms(grid, psi)
    return _rel(*terms["H3"]), _rel(*terms["H4"])
