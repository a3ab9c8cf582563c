"""Cartesian velocity and vorticity reconstructed from psi.

For an axisymmetric psi the velocity is
``u = ((x1/r) d_r d_3 psi, (x2/r) d_r d_3 psi, -Lap_r psi)``.  Psi is
interpolated from the (r, x3) grid by a tensor-product spline that is periodic in
x3, and the spline is differentiated exactly.  The vorticity-equation
residual needs fifth derivatives of psi, which a quintic spline only
reproduces to first order, so the default degree is seven.  The sampled velocity
therefore comes from a single smooth stream function, so its divergence on
the box is pure box truncation error.  Box-level derivatives (divergence,
curl, vorticity-equation terms) are centered differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline

from .diagnostics import _series
from .grid import CylGrid

_PAD = 8
SPLINE_DEGREE = 7


class EmptyIntersection(ValueError):
    """No box sample lies inside the annulus."""


@dataclass(frozen=True)
class BoxGrid:
    """Cell-centered uniform box.  Node ``j`` of axis ``a`` sits at
    ``lo[a] + (j + 1/2) * spacing[a]``.

    With ``periodic3`` the x3 extent must be one axial period; x3 differences
    then wrap around.
    """

    lo: tuple
    hi: tuple
    counts: tuple
    periodic3: bool = False

    def __post_init__(self):
        if len(self.lo) != 3 or len(self.hi) != 3 or len(self.counts) != 3:
            raise ValueError("box needs three extents and counts")
        if any(h <= l for l, h in zip(self.lo, self.hi)) or any(n < 3 for n in self.counts):
            raise ValueError("invalid box extents or counts")

    @property
    def spacing(self):
        return tuple((h - l) / n for l, h, n in zip(self.lo, self.hi, self.counts))

    def axes(self):
        return [l + (np.arange(n) + 0.5) * s for l, n, s in zip(self.lo, self.counts, self.spacing)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @classmethod
    def covering(cls, grid: CylGrid, n: int, n3: int | None = None) -> "BoxGrid":
        """Box over the full annulus cross-section and one axial period."""
        R0 = grid.R0
        return cls((-R0, -R0, -grid.L3), (R0, R0, grid.L3), (n, n, n3 or n), periodic3=True)


@dataclass
class VelocityField:
    box: BoxGrid
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    mask: np.ndarray

    @property
    def components(self):
        return (self.u1, self.u2, self.u3)

    def magnitude_max(self) -> float:
        return float(np.sqrt(self.u1**2 + self.u2**2 + self.u3**2)[self.mask].max())


class PsiSpline:
    """Interpolating spline of psi on the (r, x3) grid, periodic in x3."""

    def __init__(self, grid: CylGrid, psi: np.ndarray, degree: int = SPLINE_DEGREE):
        z = grid.z_nodes
        ze = np.concatenate([z[-_PAD:] - 2 * grid.L3, z, z[:_PAD] + 2 * grid.L3])
        fe = np.concatenate([psi[:, -_PAD:], psi, psi[:, :_PAD]], axis=1)
        self.grid = grid
        br = make_interp_spline(grid.r_nodes, fe, k=degree, axis=0)
        bz = make_interp_spline(ze, br.c, k=degree, axis=1)
        self.spline = NdBSpline((br.t, bz.t), np.moveaxis(bz.c, 0, 1), k=degree)

    def __call__(self, r, x3, dr: int = 0, dz: int = 0):
        g = self.grid
        zz = np.mod(x3 + g.L3, 2 * g.L3) - g.L3
        r, zz = np.broadcast_arrays(np.asarray(r, dtype=float), zz)
        pts = np.stack([r.ravel(), zz.ravel()], axis=-1)
        return self.spline(pts, nu=(dr, dz)).reshape(r.shape)

    def fields(self, r, x3):
        """u_r = d_r d_3 psi, Lap_r psi, and their first r and x3 derivatives."""
        p = {ij: self(r, x3, *ij) for ij in [(1, 0), (2, 0), (3, 0), (1, 1), (2, 1), (1, 2)]}
        return {
            "F1": p[1, 1],
            "F2": p[2, 0] + p[1, 0] / r,
            "F1r": p[2, 1],
            "F1z": p[1, 2],
            "F2r": p[3, 0] + p[2, 0] / r - p[1, 0] / r**2,
            "F2z": p[2, 1] + p[1, 1] / r,
        }


def _cyl_coords(grid: CylGrid, box: BoxGrid):
    X1, X2, X3 = box.mesh()
    r = np.hypot(X1, X2)
    mask = (r >= grid.r0) & (r <= grid.R0)
    if not mask.any():
        raise EmptyIntersection("no box point lies inside the annulus")
    return X1, X2, X3, r, mask


def to_cartesian(grid: CylGrid, psi: np.ndarray, box: BoxGrid) -> VelocityField:
    """Velocity samples on the box, zero outside the annulus."""
    X1, X2, X3, r, mask = _cyl_coords(grid, box)
    S = PsiSpline(grid, psi)
    rm, zm = r[mask], X3[mask]
    f1 = S(rm, zm, 1, 1)
    u1, u2, u3 = (np.zeros(box.counts) for _ in range(3))
    u1[mask] = X1[mask] / rm * f1
    u2[mask] = X2[mask] / rm * f1
    u3[mask] = -(S(rm, zm, 2, 0) + S(rm, zm, 1, 0) / rm)
    return VelocityField(box, u1, u2, u3, mask)


# box differences


def _shift(a, k, axis):
    return np.roll(a, -k, axis=axis)


def erode(mask: np.ndarray, steps: int, periodic3: bool) -> np.ndarray:
    """Points whose stencil neighborhood of the given radius stays in mask."""
    out = mask.copy()
    for _ in range(steps):
        m = out.copy()
        for ax in range(3):
            m &= _shift(out, 1, ax) & _shift(out, -1, ax)
        # non-wrapping edges
        for ax in range(3 if not periodic3 else 2):
            idx = [slice(None)] * 3
            idx[ax] = 0
            m[tuple(idx)] = False
            idx[ax] = -1
            m[tuple(idx)] = False
        out = m
    return out


def _d(a, ax, h):
    return (_shift(a, 1, ax) - _shift(a, -1, ax)) / (2.0 * h)


def _lap(a, H):
    return sum((_shift(a, 1, ax) - 2.0 * a + _shift(a, -1, ax)) / H[ax] ** 2 for ax in range(3))


def divergence(u: VelocityField, collar: int = 1):
    """Centered divergence and the interior mask where it is valid."""
    H = u.box.spacing
    div = sum(_d(c, ax, H[ax]) for ax, c in enumerate(u.components))
    valid = erode(u.mask, collar, u.box.periodic3)
    return np.where(valid, div, 0.0), valid


def _curl(comps, H):
    a1, a2, a3 = comps
    return (_d(a3, 1, H[1]) - _d(a2, 2, H[2]),
            _d(a1, 2, H[2]) - _d(a3, 0, H[0]),
            _d(a2, 0, H[0]) - _d(a1, 1, H[1]))


def vorticity(u: VelocityField, collar: int = 1):
    """Centered curl; returns the three components and the valid mask."""
    valid = erode(u.mask, collar, u.box.periodic3)
    om = _curl(u.components, u.box.spacing)
    return tuple(np.where(valid, c, 0.0) for c in om), valid


def vorticity_exact_samples(grid: CylGrid, psi: np.ndarray, box: BoxGrid):
    """Vorticity ``(-x2/r, x1/r, 0) d_r Lap psi`` sampled from the spline."""
    X1, X2, X3, r, mask = _cyl_coords(grid, box)
    S = PsiSpline(grid, psi)
    rm, zm = r[mask], X3[mask]
    f = S.fields(rm, zm)
    g = f["F2r"] + S(rm, zm, 1, 2)  # d_r Lap_r psi + d_r d_3^2 psi
    o1, o2 = np.zeros(box.counts), np.zeros(box.counts)
    o1[mask] = -X2[mask] / rm * g
    o2[mask] = X1[mask] / rm * g
    return o1, o2, np.zeros(box.counts), mask


def vorticity_equation_residual(grid: CylGrid, psi_k, psi_k1, dt: float, nu: float,
                                box: BoxGrid, collar: int = 2, nonlinear: bool = True) -> dict:
    """Residual of w_t - nu Lap w + (u.grad) w - (w.grad) u on the box.

    The time derivative is the backward difference of the two states.  It
    is centered at t_{k+1/2}, so the spatial terms are taken from the mean
    of the two velocity fields, which keeps the time error second order.
    Returns max and L2 norms over the interior, plus the L2 norm of w_t for
    scale.  ``nonlinear=False`` drops advection and stretching, for
    Stokes-flow runs.
    """
    H = box.spacing
    u0 = to_cartesian(grid, psi_k, box)
    u1 = to_cartesian(grid, psi_k1, box)
    um = [0.5 * (a + b) for a, b in zip(u0.components, u1.components)]
    om0 = _curl(u0.components, H)
    om1 = _curl(u1.components, H)
    omm = [0.5 * (a + b) for a, b in zip(om0, om1)]
    res = []
    for i in range(3):
        wt = (om1[i] - om0[i]) / dt
        rhs = wt - nu * _lap(omm[i], H)
        if nonlinear:
            adv = sum(um[j] * _d(omm[i], j, H[j]) for j in range(3))
            stretch = sum(omm[j] * _d(um[i], j, H[j]) for j in range(3))
            rhs = rhs + adv - stretch
        res.append((rhs, wt))
    valid = erode(u1.mask, collar, box.periodic3)
    R2 = sum(r[valid] ** 2 for r, _ in res)
    W2 = sum(w[valid] ** 2 for _, w in res)
    vol = box.cell_volume
    return {
        "max": float(np.sqrt(R2.max())) if R2.size else 0.0,
        "l2": math.sqrt(vol * math.fsum(R2)),
        "scale_l2": math.sqrt(vol * math.fsum(W2)),
        "points": int(valid.sum()),
    }


# box quadrature of the norms


def cell_fractions(grid: CylGrid, box: BoxGrid, sub: int = 8) -> np.ndarray:
    """Fraction of each cell's (x1, x2) footprint inside the annulus."""
    ax1, ax2, _ = box.axes()
    h1, h2, _ = box.spacing
    off = (np.arange(sub) + 0.5) / sub - 0.5
    frac = np.zeros((len(ax1), len(ax2)))
    for a in off:
        for b in off:
            r = np.hypot(ax1[:, None] + a * h1, ax2[None, :] + b * h2)
            frac += (r >= grid.r0) & (r <= grid.R0)
    return frac / sub**2


def box_norms(grid: CylGrid, psi: np.ndarray, box: BoxGrid, sub: int = 8):
    """Box quadrature of ||u||^2 and ||grad u||^2 over the annulus.

    Each cell carries the fraction of its footprint inside the annulus.  The
    integrand is evaluated at the cell center with r clamped to the annulus,
    and the Cartesian velocity gradient is assembled pointwise by the chain
    rule from derivatives of the psi spline.
    """
    if not box.periodic3:
        raise ValueError("norms need a box spanning one axial period")
    frac = cell_fractions(grid, box, sub)
    X1, X2, X3 = box.mesh()
    keep = np.broadcast_to(frac[:, :, None] > 0, X1.shape)
    x1, x2, x3 = X1[keep], X2[keep], X3[keep]
    r = np.clip(np.hypot(x1, x2), grid.r0, grid.R0)
    rr = np.hypot(x1, x2)
    c, s = x1 / rr, x2 / rr
    wgt = np.broadcast_to(frac[:, :, None], X1.shape)[keep] * box.cell_volume

    ev = PsiSpline(grid, psi).fields(r, x3)

    u = (c * ev["F1"], s * ev["F1"], -ev["F2"])
    # d_j (x_i F1 / r) = delta_ij F1/r - x_i x_j F1/r^3 + x_i x_j/r^2 d_r F1
    n = (c, s)
    grad = []
    for i in range(2):
        for j in range(2):
            dij = 1.0 if i == j else 0.0
            grad.append(dij * ev["F1"] / r - n[i] * n[j] * ev["F1"] / r + n[i] * n[j] * ev["F1r"])
        grad.append(n[i] * ev["F1z"])
    grad += [-c * ev["F2r"], -s * ev["F2r"], -ev["F2z"]]
    u2 = math.fsum(wgt * sum(ui**2 for ui in u))
    g2 = math.fsum(wgt * sum(gi**2 for gi in grad))
    return u2, g2


def energy_inequality_check(series, nu: float, dt: float, h: float, box_u2=None) -> np.ndarray:
    """Per report time: 2pi E0(t) + 2 nu int_0^t 2pi D1 <= 2pi E0(0) (1 + 10 (dt^2 + h^2)).

    ``box_u2`` optionally supplies box-sampled ||u||^2 in place of 2pi E0.
    """
    t = _series(series, "t")
    E = 2 * np.pi * _series(series, "E0") if box_u2 is None else np.asarray(box_u2, float)
    D = 2 * np.pi * _series(series, "D1")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (D[1:] + D[:-1]))])
    lhs = E + 2.0 * nu * cum
    return lhs <= E[0] * (1.0 + 10.0 * (dt**2 + h**2))
