import math

import numpy as np
import pytest
import sympy

from cns.elliptic import ModalSolver
from cns.grid import build_grid
from cns.manufactured import Manufactured, manufactured_error, observed_orders, oscillating_amplitude


@pytest.fixture(scope="module")
def ms():
    return Manufactured(1.0, 2.0, 0.5, omega=8.0)


def test_profile_and_q_match_sympy(ms):
    r = sympy.symbols("r")
    p = sympy.Rational(1, 16) * (4 * (r - 1) * (2 - r)) ** 6
    q = sympy.diff(p, r, 2) + sympy.diff(p, r) / r - p
    x = np.linspace(1.0, 2.0, 11)
    assert np.allclose(ms.p(x), sympy.lambdify(r, p)(x), rtol=1e-10, atol=1e-14)
    for k in range(3):
        assert np.allclose(ms.q(x, k), sympy.lambdify(r, sympy.diff(q, r, k))(x), atol=1e-10)
    lap_q = sympy.diff(q, r, 2) + sympy.diff(q, r) / r
    assert np.allclose(ms.q_lap(x), sympy.lambdify(r, lap_q)(x), atol=1e-8)


def test_wall_conditions(ms):
    for wall in (1.0, 2.0):
        assert ms._dp[1](wall) == pytest.approx(0.0, abs=1e-14)
        assert ms.q(np.array(wall), 1) == pytest.approx(0.0, abs=1e-12)


def test_M_matches_exact_integral(ms):
    r = sympy.symbols("r")
    p = sympy.Rational(1, 16) * (4 * (r - 1) * (2 - r)) ** 6
    lap = lambda f: sympy.diff(f, r, 2) + sympy.diff(f, r) / r  # noqa: E731
    q = lap(p) - p
    qr = sympy.diff(q, r)
    m = lap(p) * qr - (sympy.diff(q, r, 2) - qr / r) * sympy.diff(p, r)
    nodes = np.linspace(1.0, 2.0, 9)
    M = ms.M(nodes)
    assert M[0] == 0.0
    for x, val in zip(nodes[1:], M[1:]):
        exact = float(sympy.integrate(sympy.expand(m * r**3) / r**3, (r, 1, sympy.Rational(str(x)))))
        assert val == pytest.approx(exact, rel=1e-9, abs=1e-12)


def test_amplitude():
    a, da = oscillating_amplitude(3.0)
    t = np.linspace(0, 2, 9)
    assert np.allclose((a(t + 1e-6) - a(t - 1e-6)) / 2e-6, da(t), atol=1e-6)
    assert a(0.0) == 1.0


def test_discrete_forcing_tends_to_continuum(ms):
    errs = []
    for n in (32, 64, 128):
        g = build_grid(1.0, 2.0, math.pi, n + 1, n)
        Fc = ms.forcing(g)(0.3)
        Fd = ms.discrete_forcing(ModalSolver(g))(0.3)
        s = ModalSolver(g)
        errs.append(np.abs(s.project_compatible(Fc) - Fd)[2:-2].max() / np.abs(Fc).max())
    assert errs[-1] < errs[0] / 8


def test_semi_discrete_solution_is_reproduced():
    e = manufactured_error(32, 0.002, T=0.2, omega=8.0, semi_discrete=True)
    assert e < 1e-4
    e_lin = manufactured_error(32, 0.002, T=0.2, omega=8.0, semi_discrete=True, linear=True)
    assert e_lin < 1e-4


def test_observed_orders():
    assert observed_orders([1.0, 0.25, 0.0625]) == pytest.approx([2.0, 2.0])
