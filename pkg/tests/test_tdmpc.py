"""Condensed-QP MPC tests.

The condensation oracle is a literal recursive simulation of the stage
costs; pg_solve is checked against the closed-form unconstrained optimum
and descent/fixed-point properties.
"""

import numpy as np
import pytest

from rwdesat.dynamics import SpacecraftParams, equilibrium
from rwdesat.linmodel import DiscreteLinearModel, discretize_zoh, linearize_analytic
from rwdesat.numerics import solve_dare
from rwdesat.tdmpc import (
    MpcConfig,
    TdmpcController,
    condense,
    condensed_cost,
    extend_sequence,
    pg_solve,
    warm_start_shift,
)


@pytest.fixture(scope="module")
def plant():
    p = SpacecraftParams()
    dlm = discretize_zoh(linearize_analytic(p, np.array([-1.0, 1.0])), 10.0)
    return p, dlm


@pytest.fixture(scope="module")
def controller(plant):
    p, dlm = plant
    return TdmpcController(dlm, MpcConfig(), p)


def stage_cost_sum(dlm, q_diag, r_diag, p_r, xbar0, u_stack, horizon):
    """Literal evaluation of the horizon cost by forward simulation."""
    q = np.diag(q_diag)
    r = np.diag(r_diag)
    xi = np.asarray(xbar0, float)
    total = 0.0
    for j in range(horizon):
        mu = u_stack[4 * j : 4 * (j + 1)]
        total += xi @ q @ xi + mu @ r @ mu
        xi = dlm.Ad @ xi + dlm.Bd @ mu
    total += xi @ p_r @ xi
    return total


def test_condense_single_step(plant):
    p, dlm = plant
    cfg = MpcConfig(horizon=1)
    p_r = solve_dare(dlm.Ad, dlm.Bd, np.diag(cfg.q_diag), np.diag(cfg.r_diag))
    qp = condense(dlm, cfg, p_r)
    h_want = np.diag(cfg.r_diag) + dlm.Bd.T @ p_r @ dlm.Bd
    np.testing.assert_allclose(qp.H, 0.5 * (h_want + h_want.T), rtol=1e-12)
    np.testing.assert_allclose(qp.F, dlm.Bd.T @ p_r @ dlm.Ad, rtol=1e-12)


def test_condense_identity_weights():
    ad = np.zeros((10, 10))
    bd = np.vstack([np.zeros((6, 4)), np.eye(4)])
    dlm = DiscreteLinearModel(Ad=ad, Bd=bd, Ts=1.0, r=np.zeros(2))
    cfg = MpcConfig(horizon=3, q_diag=(0.0,) * 10, r_diag=(1.0,) * 4)
    qp = condense(dlm, cfg, np.zeros((10, 10)))
    np.testing.assert_allclose(qp.H, np.eye(12), atol=1e-14)


def test_condensed_cost_matches_recursive_sum(plant):
    p, dlm = plant
    cfg = MpcConfig()
    p_r = solve_dare(dlm.Ad, dlm.Bd, np.diag(cfg.q_diag), np.diag(cfg.r_diag))
    qp = condense(dlm, cfg, p_r)
    rng = np.random.default_rng(4)
    for _ in range(20):
        xbar = rng.standard_normal(10) * np.array([0.1] * 3 + [1e-3] * 3 + [10.0] * 4)
        u = rng.uniform(-0.5, 0.5, 20)
        direct = stage_cost_sum(dlm, cfg.q_diag, cfg.r_diag, p_r, xbar, u, 5)
        base = stage_cost_sum(dlm, cfg.q_diag, cfg.r_diag, p_r, xbar,
                              np.zeros(20), 5)
        condensed = condensed_cost(qp, xbar, u)
        assert abs((direct - base) - condensed) <= 1e-10 * max(abs(direct), 1.0)


def test_pg_converges_to_unconstrained_optimum(plant):
    p, dlm = plant
    cfg = MpcConfig()
    p_r = solve_dare(dlm.Ad, dlm.Bd, np.diag(cfg.q_diag), np.diag(cfg.r_diag))
    qp = condense(dlm, cfg, p_r)
    rng = np.random.default_rng(8)
    xbar = rng.standard_normal(10) * 1e-4
    u_star = -np.linalg.solve(qp.H, qp.F @ xbar)
    assert np.max(np.abs(u_star)) < 0.5  # optimum interior
    u = pg_solve(qp, xbar, np.zeros(20), 200_000, 0.5)
    assert np.max(np.abs(u - u_star)) < 1e-6 * max(1.0, np.max(np.abs(u_star)))


def test_pg_zero_state_stays_zero(plant):
    p, dlm = plant
    cfg = MpcConfig()
    p_r = solve_dare(dlm.Ad, dlm.Bd, np.diag(cfg.q_diag), np.diag(cfg.r_diag))
    qp = condense(dlm, cfg, p_r)
    for iters in (1, 7):
        u = pg_solve(qp, np.zeros(10), np.zeros(20), iters, 0.5)
        np.testing.assert_array_equal(u, np.zeros(20))


def test_pg_pins_active_bound():
    from rwdesat.tdmpc import CondensedQp

    qp = CondensedQp(
        H=np.array([[1.0]]),
        F=np.array([[1.0]]),
        L=1.0,
        phi=np.zeros((1, 1)),
        gamma=np.zeros((1, 1)),
    )
    # Unconstrained optimum at -x = -2, outside the box [-0.5, 0.5].
    u = pg_solve(qp, np.array([2.0]), np.zeros(1), 50, 0.5)
    assert u[0] == pytest.approx(-0.5)


def test_pg_monotone_descent(plant):
    p, dlm = plant
    cfg = MpcConfig()
    p_r = solve_dare(dlm.Ad, dlm.Bd, np.diag(cfg.q_diag), np.diag(cfg.r_diag))
    qp = condense(dlm, cfg, p_r)
    rng = np.random.default_rng(21)
    for _ in range(100):
        xbar = rng.standard_normal(10) * np.array([0.1] * 3 + [1e-3] * 3 + [20.0] * 4)
        u = np.clip(rng.standard_normal(20), -0.5, 0.5)
        prev = condensed_cost(qp, xbar, u)
        for _ in range(10):
            u = pg_solve(qp, xbar, u, 1, 0.5)
            cur = condensed_cost(qp, xbar, u)
            assert cur <= prev + 1e-9 * max(1.0, abs(prev))
            prev = cur


def test_pg_fixed_point_unchanged(plant):
    p, dlm = plant
    cfg = MpcConfig()
    p_r = solve_dare(dlm.Ad, dlm.Bd, np.diag(cfg.q_diag), np.diag(cfg.r_diag))
    qp = condense(dlm, cfg, p_r)
    rng = np.random.default_rng(5)
    xbar = rng.standard_normal(10) * np.array([0.05] * 3 + [1e-3] * 3 + [30.0] * 4)
    u = pg_solve(qp, xbar, np.zeros(20), 500_000, 0.5)  # converged iterate
    again = pg_solve(qp, xbar, u, 3, 0.5)
    np.testing.assert_allclose(again, u, atol=1e-9)


def test_warm_start_shift_constant_sequence():
    k = np.zeros((4, 10))
    u_prev = np.tile([0.1, -0.2, 0.3, -0.4], 5)
    shifted = warm_start_shift(u_prev, k, np.zeros(10), 0.5)
    np.testing.assert_array_equal(shifted[:16], u_prev[4:])
    np.testing.assert_array_equal(shifted[16:], np.zeros(4))


def test_warm_start_tail_rules():
    k = np.ones((4, 10))
    xbar_end = np.full(10, 1.0)
    u_prev = np.zeros(20)
    lqr_tail = warm_start_shift(u_prev, k, xbar_end, 0.5, tail="lqr")
    np.testing.assert_array_equal(lqr_tail[16:], [-0.5] * 4)  # clamped -K x
    zero_tail = warm_start_shift(u_prev, k, xbar_end, 0.5, tail="zero")
    np.testing.assert_array_equal(zero_tail[16:], np.zeros(4))


def test_extend_sequence_matches_prediction(plant, controller):
    p, dlm = plant
    rng = np.random.default_rng(2)
    x = equilibrium(np.array([3.0, 2.0]), p)
    x[6:10] += rng.uniform(-5, 5, 4)
    v = np.array([3.0, 2.0])
    u = controller.solve(x, v)
    seq = extend_sequence(u, dlm, controller.K, x, v, 5, 0.5, p)
    xbar = x - equilibrium(v, p)
    pred = controller.qp.phi @ xbar + controller.qp.gamma @ u
    np.testing.assert_allclose(seq.states[1:].reshape(-1), pred, atol=1e-12)


def test_extend_sequence_zero_at_equilibrium(plant, controller):
    p, dlm = plant
    v = np.array([-1.0, 1.0])
    x = equilibrium(v, p)
    seq = extend_sequence(np.zeros(20), dlm, controller.K, x, v, 12, 0.5, p)
    np.testing.assert_array_equal(seq.inputs, np.zeros((12, 4)))
    np.testing.assert_array_equal(seq.states, np.zeros((13, 10)))


def test_extend_sequence_tail_in_box_and_recursion_exact(plant, controller):
    p, dlm = plant
    v = np.array([0.0, 0.0])
    x = equilibrium(v, p)
    x[6:10] = (80.0, -70.0, 60.0, -50.0)  # large deviation saturates the tail
    u = controller.solve(x, v)
    seq = extend_sequence(u, dlm, controller.K, x, v, 60, 0.5, p)
    assert np.max(np.abs(seq.inputs)) <= 0.5 + 1e-15
    for j in range(60):
        nxt = dlm.Ad @ seq.states[j] + dlm.Bd @ seq.inputs[j]
        assert np.max(np.abs(nxt - seq.states[j + 1])) < 1e-12


def test_extend_sequence_rejects_short_horizon(plant, controller):
    p, dlm = plant
    with pytest.raises(ValueError):
        extend_sequence(np.zeros(20), dlm, controller.K,
                        equilibrium(np.zeros(2), p), np.zeros(2), 3, 0.5, p)


def test_warm_start_beats_cold_start_in_closed_loop(plant):
    p, dlm = plant
    cfg_warm = MpcConfig()
    cfg_cold = MpcConfig(warm_start=False)
    v = np.array([-1.0, 1.0])
    x0 = np.array([-0.006, 0.009, -0.023, 0.0, -p.n, 0.0, -5.0, 23.5, -4.4, 24.3])

    def run(cfg):
        from rwdesat.dynamics import propagate_zoh

        ctrl = TdmpcController(dlm, cfg, p)
        x = x0.copy()
        costs = []
        for _ in range(3):
            u_stack = ctrl.solve(x, v)
            xbar = x - equilibrium(v, p)
            costs.append(condensed_cost(ctrl.qp, xbar, u_stack))
            x = propagate_zoh(x, u_stack[:4], 10.0, 1.0, p)
        return costs

    warm = run(cfg_warm)
    cold = run(cfg_cold)
    assert warm[2] <= cold[2] + 1e-12 * abs(cold[2])


def test_config_validation():
    with pytest.raises(ValueError):
        MpcConfig(horizon=0)
    with pytest.raises(ValueError):
        MpcConfig(iters=0)
    with pytest.raises(ValueError):
        MpcConfig(r_diag=(0.0,) * 4)
    with pytest.raises(ValueError):
        MpcConfig(warm_tail="nope")
