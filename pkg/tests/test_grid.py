import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cns.grid import InvalidDomain, ScalarField, build_grid, weighted_integral


def test_nodes_and_weights():
    g = build_grid(1.0, 2.0, math.pi, 11, 16)
    assert g.r_nodes[0] == 1.0 and g.r_nodes[-1] == 2.0
    assert np.allclose(np.diff(g.r_nodes), 0.1)
    assert g.z_nodes[0] == -math.pi
    assert g.z_nodes[-1] == pytest.approx(math.pi - g.dz)
    assert g.quad_w_r.sum() == pytest.approx(1.0)
    assert g.shape == (11, 16)
    assert g.h == max(g.dr, g.dz)


def test_arrays_are_read_only():
    g = build_grid(1.0, 2.0, 1.0, 9, 8)
    with pytest.raises(ValueError):
        g.r_nodes[0] = 0.0


@pytest.mark.parametrize("args", [
    (0.0, 2.0, 1.0, 16, 16),
    (2.0, 1.0, 1.0, 16, 16),
    (1.0, 2.0, -1.0, 16, 16),
    (1.0, 2.0, 1.0, 4, 16),
    (1.0, 2.0, 1.0, 16, 15),
    (1.0, 2.0, 1.0, 16.5, 16),
])
def test_invalid_domains(args):
    with pytest.raises(InvalidDomain):
        build_grid(*args)


def test_scalar_field_validation():
    g = build_grid(1.0, 2.0, 1.0, 9, 8)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((8, 8)))
    bad = g.zeros()
    bad[0, 0] = np.inf
    with pytest.raises(ValueError):
        ScalarField(g, bad)


def test_weighted_integral_exact_for_linear_in_r():
    # trapezoid rule is exact for f r^p linear in r
    g = build_grid(1.0, 3.0, 2.0, 9, 8)
    one = np.ones(g.shape)
    assert weighted_integral(g, one, 0) == pytest.approx(2.0 * 4.0)
    assert weighted_integral(g, one, 1) == pytest.approx(4.0 * 4.0)
    assert weighted_integral(g, ScalarField(g, one), 1) == pytest.approx(16.0)


def test_weighted_integral_rejects():
    g = build_grid(1.0, 2.0, 1.0, 9, 8)
    with pytest.raises(ValueError):
        weighted_integral(g, g.zeros(), 2)
    f = g.zeros()
    f[1, 1] = np.nan
    with pytest.raises(ValueError):
        weighted_integral(g, f)


def test_weighted_integral_second_order():
    errs = []
    for n in (16, 32, 64):
        g = build_grid(1.0, 2.0, math.pi, n + 1, 8)
        R, _ = g.mesh()
        errs.append(abs(weighted_integral(g, np.exp(R), -1) - 2 * math.pi * 3.0591165396459))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert orders.min() > 1.9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weighted_integral_order_independent(seed):
    # fsum is exactly rounded, so permuting the axial samples changes nothing
    g = build_grid(1.0, 2.0, 1.0, 9, 8)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=g.shape) * 10.0 ** rng.integers(-8, 8, size=g.shape)
    perm = rng.permutation(g.Nz)
    assert weighted_integral(g, f, 1) == weighted_integral(g, f[:, perm], 1)


def test_spacing_example():
    g = build_grid(1.0, 2.0, math.pi, 9, 8)
    assert g.dr == 0.125 and g.dz == pytest.approx(math.pi / 4)


def test_unit_quadrature_in_r():
    g = build_grid(1.0, 2.0, math.pi, 257, 256)
    assert math.fsum(g.quad_w_r) == 1.0


def test_constant_integrals():
    g = build_grid(1.0, 2.0, math.pi, 257, 256)
    one = np.ones(g.shape)
    assert weighted_integral(g, one, 1) == pytest.approx(3 * math.pi, rel=1e-14)
    assert weighted_integral(g, one, -1) == pytest.approx(2 * math.pi * math.log(2), rel=1e-5)


def test_gauss_legendre_oracle():
    # int (r-1)^2 (2-r)^2 cos^2(x3) dr dx3 from a 64-point Gauss-Legendre rule in r
    x, w = np.polynomial.legendre.leggauss(64)
    r = 1.5 + 0.5 * x
    radial = 0.5 * np.sum(w * (r - 1) ** 2 * (2 - r) ** 2)
    exact = radial * math.pi
    g = build_grid(1.0, 2.0, math.pi, 256, 256)
    R, Z = g.mesh()
    val = weighted_integral(g, (R - 1) ** 2 * (2 - R) ** 2 * np.cos(Z) ** 2, 0)
    assert val == pytest.approx(exact, rel=1e-6)
