"""Linearization and discretization tests.

The finite-difference Jacobian of the nonlinear model is the oracle for
the closed-form matrices; an RK4 integration of the linear ODE is the
oracle for the zero-order-hold pair.
"""

import math

import numpy as np
import pytest

from rwdesat.dynamics import SpacecraftParams
from rwdesat.linmodel import (
    ANALYTIC_ABS_TOL,
    ANALYTIC_REL_TOL,
    discretize_zoh,
    linearize,
    linearize_analytic,
    linearize_numeric,
    ContinuousLinearModel,
)

GRID_ALPHAS = (-75.0, -45.0, -15.0, 15.0, 45.0, 75.0)
GRID_BETAS = (0.0, 15.0, 30.0)
GRID_REFS = ((0.0, 0.0), (-1.0, 1.0), (50.0, -50.0))


def test_analytic_matches_numeric_on_grid():
    worst = -np.inf
    for a in GRID_ALPHAS:
        for b in GRID_BETAS:
            p = SpacecraftParams(alpha=math.radians(a), beta=math.radians(b))
            for r in GRID_REFS:
                an = linearize_analytic(p, np.array(r))
                nu = linearize_numeric(p, np.array(r))
                for ma, mn in ((an.A, nu.A), (an.B, nu.B)):
                    tol = np.maximum(ANALYTIC_REL_TOL * np.abs(ma), ANALYTIC_ABS_TOL)
                    worst = max(worst, float(np.max(np.abs(ma - mn) - tol)))
    assert worst <= 0.0, f"worst tolerance excess {worst:.3e}"


def test_specific_gravity_gradient_entry():
    p = SpacecraftParams()
    m = linearize_analytic(p, np.zeros(2))
    expected = -3.0 * p.n**2 * (p.J2 - p.J3) / p.J1
    assert m.A[3, 0] == pytest.approx(expected, rel=1e-14)


def test_input_matrix_block_structure():
    for alpha, beta in [(0.3, 0.1), (-1.2, 1.0), (0.0, 0.0)]:
        p = SpacecraftParams(alpha=alpha, beta=beta)
        m = linearize_analytic(p, np.array([2.0, -3.0]))
        np.testing.assert_array_equal(m.B[0:3], np.zeros((3, 4)))
        np.testing.assert_array_equal(m.B[6:10], np.eye(4))


def test_flat_array_geometry_pattern():
    # alpha = 0: wheel spin axes lie in the body x-z plane, so the pitch
    # rate row loses both its input and wheel-speed coupling.
    p = SpacecraftParams(alpha=0.0, beta=math.radians(20.0))
    m = linearize_analytic(p, np.zeros(2))
    np.testing.assert_array_equal(m.B[4], np.zeros(4))
    cb, sb = math.cos(p.beta), math.sin(p.beta)
    e4 = p.n * p.Js / p.J1
    np.testing.assert_allclose(
        m.A[3, 6:10], e4 * np.array([cb, -sb, -cb, sb]), rtol=1e-14
    )
    np.testing.assert_array_equal(m.A[4, 6:10], np.zeros(4))


def test_numeric_wheel_rows_zero():
    p = SpacecraftParams()
    m = linearize_numeric(p, np.array([5.0, -2.0]))
    np.testing.assert_allclose(m.A[6:10], np.zeros((4, 10)), atol=1e-12)


def test_numeric_rejects_non_equilibrium():
    from rwdesat.dynamics import equilibrium

    p = SpacecraftParams()
    x = equilibrium(np.zeros(2), p)
    x[1] = 0.05  # pitch offset makes the point non-stationary
    with pytest.raises(ValueError, match="not an equilibrium"):
        linearize_numeric(p, np.zeros(2), x0=x)


def test_linearize_prefers_analytic_when_agreeing():
    p = SpacecraftParams()
    m = linearize(p, np.array([-1.0, 1.0]))
    an = linearize_analytic(p, np.array([-1.0, 1.0]))
    np.testing.assert_array_equal(m.A, an.A)


def test_zoh_zero_dynamics():
    b = np.arange(40.0).reshape(10, 4)
    m = ContinuousLinearModel(A=np.zeros((10, 10)), B=b, r=np.zeros(2))
    d = discretize_zoh(m, 10.0)
    np.testing.assert_allclose(d.Ad, np.eye(10), atol=1e-14)
    np.testing.assert_allclose(d.Bd, 10.0 * b, rtol=1e-13, atol=1e-12)


def test_zoh_scalar_closed_form():
    m = ContinuousLinearModel(
        A=np.array([[-1.0]]), B=np.array([[1.0]]), r=np.zeros(2)
    )
    d = discretize_zoh(m, 1.0)
    assert d.Ad[0, 0] == pytest.approx(math.exp(-1.0), rel=1e-12)
    assert d.Bd[0, 0] == pytest.approx(1.0 - math.exp(-1.0), rel=1e-12)


def test_zoh_against_rk4_integration():
    p = SpacecraftParams()
    m = linearize_analytic(p, np.array([-1.0, 1.0]))
    d = discretize_zoh(m, 10.0)

    def integrate(x0, u, t_end, n_steps=2000):
        x = x0.copy()
        h = t_end / n_steps
        for _ in range(n_steps):
            k1 = m.A @ x + m.B @ u
            k2 = m.A @ (x + 0.5 * h * k1) + m.B @ u
            k3 = m.A @ (x + 0.5 * h * k2) + m.B @ u
            k4 = m.A @ (x + h * k3) + m.B @ u
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    for i in range(10):
        e = np.zeros(10)
        e[i] = 1.0
        col = integrate(e, np.zeros(4), 10.0)
        assert np.max(np.abs(col - d.Ad[:, i])) < 1e-9
    for j in range(4):
        u = np.zeros(4)
        u[j] = 1.0
        col = integrate(np.zeros(10), u, 10.0)
        assert np.max(np.abs(col - d.Bd[:, j])) < 1e-9


def test_zoh_semigroup():
    p = SpacecraftParams()
    m = linearize_analytic(p, np.zeros(2))
    d1 = discretize_zoh(m, 4.0)
    d2 = discretize_zoh(m, 6.0)
    d12 = discretize_zoh(m, 10.0)
    np.testing.assert_allclose(d12.Ad, d2.Ad @ d1.Ad, atol=1e-9)


def test_zoh_eigenvalue_map():
    p = SpacecraftParams()
    m = linearize_analytic(p, np.zeros(2))
    d = discretize_zoh(m, 10.0)
    lam_c = np.linalg.eigvals(m.A)
    lam_d = np.linalg.eigvals(d.Ad)
    want = np.sort_complex(np.exp(10.0 * lam_c))
    got = np.sort_complex(lam_d)
    np.testing.assert_allclose(got, want, atol=1e-8)


def test_zoh_rejects_bad_period():
    m = linearize_analytic(SpacecraftParams(), np.zeros(2))
    with pytest.raises(ValueError):
        discretize_zoh(m, 0.0)
