"""Dynamics tests: equilibria, wheel momentum, gravity gradient, integrator.

The key oracle is an independent transcription of the rotational dynamics
built from rotation matrices and the general rigid-body equation; the
production right-hand side uses the expanded closed forms, so the two
share no code path.
"""

import math

import numpy as np
import pytest

from rwdesat.dynamics import (
    SpacecraftParams,
    KinematicsSingularityError,
    eom_rhs,
    equilibrium,
    euler_dcm,
    propagate_zoh,
    rk4_step,
    rot1,
    rot2,
    rw_momentum,
    wheel_axes,
)


def reference_rhs(x, u, p):
    """Independent right-hand side: rotation-matrix route, no closed forms."""
    phi, theta, psi = x[0:3]
    w = x[3:6]
    om = x[6:10]

    axes = np.stack(
        [
            (rot1(p.alpha) @ rot2(p.beta + i * math.pi / 2)).T @ np.array([0.0, 0.0, 1.0])
            for i in range(4)
        ]
    )
    h = p.Js * axes.T @ om
    h_dot = p.Js * axes.T @ u

    J = np.diag([p.J1, p.J2, p.J3])
    # Nadir direction in body coordinates and the gravity-gradient torque.
    c = euler_dcm(phi, theta, psi) @ np.array([0.0, 0.0, 1.0])
    m_gg = 3.0 * p.n**2 * np.cross(c, J @ c)

    w_dot = np.linalg.solve(J, m_gg - np.cross(w, J @ w + h) - h_dot)

    # Kinematics in matrix form.
    cth, sth = math.cos(theta), math.sin(theta)
    cphi, sphi = math.cos(phi), math.sin(phi)
    cpsi, spsi = math.cos(psi), math.sin(psi)
    kin = (1.0 / cth) * np.array(
        [
            [cth, sphi * sth, cphi * sth],
            [0.0, cphi * cth, -sphi * cth],
            [0.0, sphi, cphi],
        ]
    )
    orbit = p.n * np.array(
        [
            cth * spsi,
            sphi * sth * spsi + cphi * cpsi,
            cphi * sth * spsi - sphi * cpsi,
        ]
    )
    ang_dot = kin @ (w + orbit)
    return np.concatenate([ang_dot, w_dot, u])


def test_equilibrium_is_fixed_point():
    p = SpacecraftParams()
    x = equilibrium(np.array([0.0, 0.0]), p)
    assert np.max(np.abs(eom_rhs(x, np.zeros(4), p))) == 0.0


def test_equilibrium_values():
    p = SpacecraftParams()
    x = equilibrium(np.array([0.0, 0.0]), p)
    expected = np.zeros(10)
    expected[4] = -1.1086e-3
    np.testing.assert_allclose(x, expected)
    x2 = equilibrium(np.array([-1.0, 1.0]), p)
    np.testing.assert_array_equal(x2[6:10], [-1.0, 1.0, -1.0, 1.0])


def test_equilibrium_any_geometry_and_command():
    rng = np.random.default_rng(42)
    for _ in range(100):
        p = SpacecraftParams(
            alpha=rng.uniform(-math.pi / 2, math.pi / 2),
            beta=rng.uniform(0.0, math.pi / 2 * 0.999),
        )
        v = rng.uniform(-90.0, 90.0, 2)
        res = eom_rhs(equilibrium(v, p), np.zeros(4), p)
        assert np.max(np.abs(res)) < 1e-12


def test_rw_momentum_pair_pattern():
    p = SpacecraftParams(alpha=0.4, beta=0.2)
    x = np.zeros(10)
    a, b = 12.5, -7.0
    x[6:10] = (a, b, a, b)
    h = rw_momentum(x, p)
    np.testing.assert_allclose(
        h, [0.0, -2.0 * p.Js * math.sin(p.alpha) * (a + b), 0.0], atol=1e-14
    )


def test_rw_momentum_single_wheel_aligned():
    p = SpacecraftParams(alpha=0.0, beta=0.0)
    x = np.zeros(10)
    x[6] = 1.0
    np.testing.assert_allclose(rw_momentum(x, p), [0.0, 0.0, p.Js], atol=1e-15)


def test_rw_momentum_matches_frame_construction():
    p = SpacecraftParams(alpha=math.pi / 4, beta=0.0)
    x = np.zeros(10)
    x[6:10] = (-5.0, 23.5, -4.4, 24.3)
    h_direct = p.Js * wheel_axes(p).T @ x[6:10]
    np.testing.assert_allclose(rw_momentum(x, p), h_direct, atol=1e-12)

    rng = np.random.default_rng(3)
    for _ in range(50):
        pp = SpacecraftParams(
            alpha=rng.uniform(-math.pi / 2, math.pi / 2),
            beta=rng.uniform(0.0, math.pi / 2 * 0.999),
        )
        xx = np.zeros(10)
        xx[6:10] = rng.uniform(-90, 90, 4)
        h1 = rw_momentum(xx, pp)
        h2 = pp.Js * wheel_axes(pp).T @ xx[6:10]
        assert np.max(np.abs(h1 - h2)) < 1e-12


def test_rhs_matches_independent_transcription():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = SpacecraftParams(
            alpha=rng.uniform(-1.5, 1.5), beta=rng.uniform(0.0, 1.5)
        )
        x = np.concatenate(
            [
                rng.uniform(-0.3, 0.3, 3),
                rng.uniform(-5e-3, 5e-3, 3),
                rng.uniform(-50, 50, 4),
            ]
        )
        u = rng.uniform(-0.5, 0.5, 4)
        got = eom_rhs(x, u, p)
        want = reference_rhs(x, u, p)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)


def test_gravity_gradient_from_pitch_offset():
    p = SpacecraftParams()
    x = equilibrium(np.array([-1.0, 1.0]), p)
    x[1] = 0.01  # pitch offset switches the gravity gradient on
    got = eom_rhs(x, np.zeros(4), p)
    want = reference_rhs(x, np.zeros(4), p)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-18)
    # Pitch offset at zero roll leaves the roll/yaw gravity terms zero but
    # couples through the wheel momentum; the pitch-rate derivative moves.
    assert got[4] != 0.0


def test_rk4_equilibrium_unchanged():
    p = SpacecraftParams()
    x = equilibrium(np.array([3.0, -4.0]), p)
    x_next = rk4_step(x, np.zeros(4), 50.0, p)
    np.testing.assert_allclose(x_next, x, atol=1e-15)


def test_rk4_wheel_integrator_exact():
    # Wheel speeds integrate their accelerations exactly under RK4 since
    # that subsystem is linear with constant input.
    p = SpacecraftParams()
    x = equilibrium(np.array([0.0, 0.0]), p)
    u = np.array([0.1, -0.2, 0.3, -0.4])
    dt = 2.0
    x_next = rk4_step(x, u, dt, p)
    np.testing.assert_allclose(x_next[6:10], x[6:10] + u * dt, rtol=1e-14)


def test_rk4_convergence_order():
    p = SpacecraftParams()
    x0 = equilibrium(np.array([10.0, -20.0]), p)
    x0[0:3] += (0.05, -0.04, 0.06)
    u = np.array([0.05, -0.05, 0.02, 0.01])

    def run(dt):
        return propagate_zoh(x0, u, 100.0, dt, p)

    # Reference at dt/64; smaller steps would drown in accumulated roundoff.
    ref = run(20.0 / 64)
    err_h = np.linalg.norm(run(20.0) - ref)
    err_h2 = np.linalg.norm(run(10.0) - ref)
    ratio = err_h / err_h2
    order = math.log2(ratio)
    assert order >= 3.9, f"observed order {order:.2f}"


def test_momentum_conservation_spherical_inertia():
    # Equal principal inertias remove gravity-gradient and inertia-difference
    # torques entirely, so inertial angular momentum is exactly conserved
    # and measures only integrator drift.
    p = SpacecraftParams(J1=1000.0, J2=1000.0, J3=1000.0)
    x = np.zeros(10)
    x[2] = 0.3  # yaw only; roll = pitch = 0
    x[3:6] = (2e-4, -p.n, 3e-4)
    x[6:10] = (40.0, -20.0, 10.0, 5.0)
    u = np.zeros(4)

    def h_inertial(x, t):
        J = np.diag([p.J1, p.J2, p.J3])
        h_body = J @ x[3:6] + rw_momentum(x, p)
        h_lvlh = euler_dcm(*x[0:3]).T @ h_body
        # LVLH rotates at rate n about its -y axis.
        w = np.array([0.0, -p.n, 0.0])
        wx = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
        from scipy.linalg import expm

        return expm(wx * t) @ h_lvlh

    h0 = h_inertial(x, 0.0)
    t, dt = 0.0, 1.0
    x_t = x.copy()
    n_steps = int(p.orbit_period)
    for _ in range(n_steps):
        x_t = rk4_step(x_t, u, dt, p)
        t += dt
    h1 = h_inertial(x_t, t)
    drift = np.linalg.norm(h1 - h0) / np.linalg.norm(h0)
    assert drift < 1e-8, f"momentum drift {drift:.2e}"


def test_singularity_guard():
    p = SpacecraftParams()
    x = equilibrium(np.array([0.0, 0.0]), p)
    x[1] = math.pi / 2 - 1e-9
    with pytest.raises(KinematicsSingularityError):
        eom_rhs(x, np.zeros(4), p)


def test_param_validation():
    with pytest.raises(ValueError):
        SpacecraftParams(J1=-1.0)
    with pytest.raises(ValueError):
        SpacecraftParams(J1=5000.0)  # triangle inequality
    with pytest.raises(ValueError):
        SpacecraftParams(Js=0.0)
    with pytest.raises(ValueError):
        SpacecraftParams(n=0.0)
    with pytest.raises(ValueError):
        SpacecraftParams(alpha=2.0)
    with pytest.raises(ValueError):
        SpacecraftParams(beta=math.pi / 2)
    with pytest.raises(ValueError):
        rk4_step(equilibrium(np.zeros(2), SpacecraftParams()), np.zeros(4), -1.0,
                 SpacecraftParams())


def test_u_max_derived_from_torque():
    p = SpacecraftParams()
    assert p.u_max == pytest.approx(0.5)
