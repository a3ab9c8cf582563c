import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from cns.diagnostics import (DecayViolation, EnergyReport, PsiDerivatives, check_linf_interpolation,
                             check_observation_identities, ew_monotone, gronwall_check,
                             identity_residual_L2, identity_residual_weighted, report,
                             time_derivative_functional)
from cns.grid import build_grid
from cns.timestepper import preset_field

r = sympy.symbols("r", positive=True)
P = 16 * ((r - 1) * (2 - r)) ** 4  # octic-cos profile


def _lap(f):
    return sympy.diff(f, r, 2) + sympy.diff(f, r) / r


def _int(f, p):
    return float(sympy.integrate(sympy.expand(f * r**p), (r, 1, 2)))


@pytest.fixture(scope="module")
def oracle():
    # psi = P(r) cos(x3) on one period; cos^2 and sin^2 both integrate to pi
    w = _lap(P) - P
    wr = sympy.diff(w, r)
    return {
        "E0": math.pi * (_int(_lap(P) ** 2, 1) + _int(sympy.diff(P, r) ** 2, 1)),
        "D1": math.pi * _int(wr**2, 1),
        "Ew": math.pi * float(sympy.integrate(sympy.cancel(wr**2 / r), (r, 1, 2))),
        "D2": math.pi * (float(sympy.integrate(sympy.cancel(_lap(w) ** 2 * r), (r, 1, 2)))
                         + _int(wr**2, 1)),
    }


def test_report_matches_exact_integrals(oracle):
    errs = {k: [] for k in oracle}
    for n in (64, 128):
        g = build_grid(1.0, 2.0, math.pi, n + 1, n)
        rep = report(g, preset_field("octic-cos", g))
        for k in oracle:
            errs[k].append(abs(getattr(rep, k) - oracle[k]) / oracle[k])
    for k, (a, b) in errs.items():
        assert b < 1e-2, k
        assert a / b > 3.0, k


def test_report_columns():
    cols = EnergyReport.columns()
    assert cols == ["t", "E0", "D1", "Ew", "Dw", "E1", "D2", "E3", "linf_dr_dz_psi"]
    g = build_grid(1.0, 2.0, math.pi, 33, 32)
    row = report(g, preset_field("quartic-cos", g), 0.5).as_row()
    assert set(row) == set(cols) and row["E1"] == row["D1"] and row["t"] == 0.5


def test_derivatives_consistent():
    g = build_grid(1.0, 2.0, math.pi, 65, 64)
    d = PsiDerivatives(g, preset_field("octic-cos", g))
    # Lap w assembled two ways
    assert np.allclose(d.lap_r_w[4:-4], (d.drr_w + d.dr_w / d.r)[4:-4], atol=0.5)


def test_observation_identities_converge():
    res = []
    for n in (64, 128, 256):
        g = build_grid(1.0, 2.0, math.pi, n, n)
        res.append(check_observation_identities(g, preset_field("octic-cos", g)))
    res = np.array(res)
    assert res[-1].max() < 1e-4
    assert np.log2(res[:-1] / res[1:]).min() > 1.8


def _series(E0, D1, Ew, Dw, t):
    z = np.zeros_like(t)
    return [EnergyReport(*row) for row in zip(t, E0, D1, Ew, Dw, z, z, z)]


def test_identity_residuals_on_exponential_decay():
    # E0 = exp(-2 a t) with D1 = (a / nu) E0 solves the L2 identity exactly;
    # the trapezoid residual is O(dt^2)
    nu, a = 0.5, 3.0
    out = []
    for dt in (0.01, 0.005):
        t = np.arange(0, 1 + dt / 2, dt)
        E = np.exp(-2 * a * t)
        s = _series(E, a / nu * E, 2 * E, 2 * a / nu * E, t)
        r1, r2 = identity_residual_L2(s, nu), identity_residual_weighted(s, nu)
        assert np.allclose(r1, r2)
        out.append(np.abs(r1).max())
    assert out[0] < 1e-3 and 3.9 < out[0] / out[1] < 4.1


def test_identity_residual_input_checks():
    e = EnergyReport(0.0, 1, 1, 1, 1, 0, 0, 0)
    with pytest.raises(ValueError):
        identity_residual_L2([e], 1.0)
    with pytest.raises(ValueError):
        identity_residual_L2([e, e], 1.0)


def test_monotone_and_gronwall_flags():
    t = np.array([0.0, 0.1, 0.2, 0.3])
    Ew = np.array([1.0, 0.9, 1.0, 0.5])
    s = _series(np.ones(4), np.array([1.0, 1.05, 1.2, 100.0]), Ew, np.ones(4), t)
    assert ew_monotone(s, 0.1, 0.01).tolist() == [True, False, True]
    assert gronwall_check(s).tolist() == [True, True, True, False]


def test_time_derivative_functional():
    g = build_grid(1.0, 2.0, math.pi, 65, 64)
    psi = preset_field("octic-cos", g)
    val = time_derivative_functional(g, psi, 1.1 * psi, 0.1)
    assert val == pytest.approx(report(g, psi).D1, rel=1e-12)


def test_linf_interpolation_gaussian_oracle():
    # f = exp(-x^2): ||f||^2 = ||f'||^2 = sqrt(pi/2)
    x = np.linspace(-10, 10, 20001)
    h = x[1] - x[0]
    lhs, rhs, ok = check_linf_interpolation(np.exp(-x**2), h)
    exact = math.sqrt(2.0) * (math.pi / 2) ** 0.25
    assert lhs == 1.0 and ok
    assert rhs == pytest.approx(exact, rel=1e-6)


def test_linf_interpolation_rejects():
    x = np.linspace(-1, 1, 101)
    with pytest.raises(DecayViolation):
        check_linf_interpolation(np.exp(-x**2), x[1] - x[0])
    with pytest.raises(ValueError):
        check_linf_interpolation(np.zeros((3, 3)), 0.1)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 2.0), st.floats(0.0, 5.0), st.floats(-4, 4))
def test_linf_interpolation_property(c, s, k, a):
    x = np.linspace(-15, 15, 3001)
    f = a * np.exp(-((x - c) / s) ** 2) * np.cos(k * x)
    if np.abs(f).max() == 0:
        return
    _, _, ok = check_linf_interpolation(f, x[1] - x[0])
    assert ok


Q4 = (r - 1) ** 2 * (2 - r) ** 2  # quartic-cos profile


@pytest.fixture(scope="module")
def quartic_oracle():
    # integrals of the polynomial parts from a 64-point Gauss-Legendre rule
    x, wts = np.polynomial.legendre.leggauss(64)
    rs = 1.5 + 0.5 * x
    w = _lap(Q4) - Q4
    wr = sympy.diff(w, r)

    def gl(expr, p):
        f = sympy.lambdify(r, expr)
        return math.pi * 0.5 * float(np.sum(wts * f(rs) * rs**p))

    return {
        "E0": gl(_lap(Q4) ** 2 + sympy.diff(Q4, r) ** 2, 1),
        "D1": gl(wr**2, 1),
        "Ew": gl(wr**2, -1),
        "D2": gl(_lap(w) ** 2 + wr**2, 1),
    }


def test_quartic_functionals_match_oracle(quartic_oracle):
    g = build_grid(1.0, 2.0, math.pi, 257, 256)
    rep = report(g, preset_field("quartic-cos", g))
    # E0 misses by a little: the trapezoid rule on the exact integrand already
    # leaves 1.5e-4 here, since (Lap_r psi)^2 has nonzero slope at the walls
    errs = {k: abs(getattr(rep, k) - v) / v for k, v in quartic_oracle.items()}
    assert max(errs.values()) < 1e-4, errs


def test_functionals_are_quadratic():
    g = build_grid(1.0, 2.0, math.pi, 33, 32)
    psi = preset_field("quartic-cos", g)
    a, b = report(g, psi), report(g, 2 * psi)
    for k in ("E0", "D1", "Ew", "Dw", "D2", "E3"):
        assert getattr(b, k) == pytest.approx(4 * getattr(a, k), rel=1e-14)


def test_zero_field_report():
    g = build_grid(1.0, 2.0, math.pi, 17, 16)
    rep = report(g, g.zeros())
    assert all(v == 0.0 for k, v in rep.as_row().items() if k != "t")
    assert check_observation_identities(g, g.zeros()) == (0.0, 0.0)


def test_interpolation_zero_profile():
    assert check_linf_interpolation(np.zeros(11), 0.1) == (0.0, 0.0, True)


def test_axially_uniform_decomposition():
    # without x3 dependence the decompositions reduce to identities per radius
    g = build_grid(1.0, 2.0, math.pi, 65, 16)
    R, _ = g.mesh()
    res = check_observation_identities(g, np.sin(3 * R) * np.exp(R))
    assert max(res) < 1e-12


def test_linear_identity_residual_refines():
    from cns.timestepper import RunConfig, run
    worst = []
    for n, dt in ((32, 4e-3), (64, 2e-3), (128, 1e-3)):
        _, reps = run(RunConfig(nu=0.5, T_end=0.1, dt=dt, Nr=n + 1, Nz=n, report_every=1,
                                preset="octic-cos", linear_only=True))
        worst.append(np.abs(identity_residual_L2(reps, 0.5)).max())
    assert np.log2(worst[0] / worst[1]) >= 2.0 and np.log2(worst[1] / worst[2]) >= 2.0, worst
