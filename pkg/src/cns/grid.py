"""Ring-cylinder grid and quadrature.

The computational domain is ``r0 <= r <= R0`` with the axial coordinate
truncated to the periodic interval ``[-L3, L3)``.  Radial nodes are uniform
and include both walls; axial nodes are uniform and exclude the right end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MIN_NODES = 8


class InvalidDomain(ValueError):
    """Raised for grids that violate the domain invariants."""


@dataclass(frozen=True)
class CylGrid:
    r0: float
    R0: float
    L3: float
    Nr: int
    Nz: int
    r_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    z_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    quad_w_r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        r = np.linspace(self.r0, self.R0, self.Nr)
        r[0], r[-1] = self.r0, self.R0
        z = -self.L3 + self.dz * np.arange(self.Nz)
        w = np.full(self.Nr, self.dr)
        w[0] = w[-1] = 0.5 * self.dr
        for name, arr in (("r_nodes", r), ("z_nodes", z), ("quad_w_r", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dr(self) -> float:
        return (self.R0 - self.r0) / (self.Nr - 1)

    @property
    def dz(self) -> float:
        return 2.0 * self.L3 / self.Nz

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nr, self.Nz)

    @property
    def h(self) -> float:
        """Largest mesh spacing."""
        return max(self.dr, self.dz)

    @property
    def rcol(self) -> np.ndarray:
        """Radial nodes as a column, for broadcasting against fields."""
        return self.r_nodes[:, None]

    def mesh(self):
        """Return ``(R, Z)`` arrays of shape ``(Nr, Nz)``."""
        return np.meshgrid(self.r_nodes, self.z_nodes, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


def build_grid(r0: float, R0: float, L3: float, Nr: int, Nz: int) -> CylGrid:
    """Validate parameters and construct a :class:`CylGrid`."""
    if not (r0 > 0):
        raise InvalidDomain(f"inner radius must be positive, got r0={r0}")
    if not (R0 > r0):
        raise InvalidDomain(f"need R0 > r0, got r0={r0}, R0={R0}")
    if not (L3 > 0):
        raise InvalidDomain(f"need L3 > 0, got {L3}")
    if int(Nr) != Nr or int(Nz) != Nz:
        raise InvalidDomain("node counts must be integers")
    Nr, Nz = int(Nr), int(Nz)
    if Nr < MIN_NODES or Nz < MIN_NODES:
        raise InvalidDomain(f"need Nr, Nz >= {MIN_NODES}, got ({Nr}, {Nz})")
    if Nz % 2:
        raise InvalidDomain(f"Nz must be even, got {Nz}")
    return CylGrid(float(r0), float(R0), float(L3), Nr, Nz)


@dataclass
class ScalarField:
    """Samples of a real function on a :class:`CylGrid`."""

    grid: CylGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")


def _as_array(f) -> np.ndarray:
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)


def weighted_integral(grid: CylGrid, f, p: int = 1) -> float:
    """Trapezoid-in-r, rectangle-in-x3 quadrature of ``f * r**p``.

    Summation uses :func:`math.fsum`, which is exactly rounded and therefore
    independent of summation order.
    """
    if p not in (-1, 0, 1):
        raise ValueError(f"p must be -1, 0 or 1, got {p}")
    a = _as_array(f)
    if a.shape != grid.shape:
        raise ValueError(f"field shape {a.shape} does not match grid {grid.shape}")
    if np.isnan(a).any():
        raise ValueError("NaN in integrand")
    wr = grid.quad_w_r * grid.r_nodes**p
    return math.fsum((a * wr[:, None]).ravel()) * grid.dz
