"""Input-constrained LQ-MPC solved by a fixed projected-gradient budget.

The finite-horizon tracking problem

    min  sum_{j=0}^{N-1} ( ||xi_j||_Q^2 + ||mu_j||_R^2 ) + ||xi_N||_P^2
    s.t. xi_0 = xbar,  xi_{j+1} = Ad xi_j + Bd mu_j,  |mu_j|_inf <= u_max

is condensed onto the stacked input vector U, giving

    J(U) = U^T H U + 2 (F xbar)^T U + const,

and solved with l iterations of box-projected gradient descent with the
fixed step 1/lambda_max(H). A small l with warm starting gives an
anytime-feasible suboptimal controller whose per-step cost is a handful
of small matrix products: the time-distributed MPC used by the
desaturation controllers.

The cost carries no 1/2 factor; with the gradient-like quantity
g = H U + F xbar, the update U <- clamp(U - g / lambda_max(H)) is exact
gradient projection for J and descends monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rwdesat.dynamics import N_INPUTS, N_STATES, SpacecraftParams, equilibrium
from rwdesat.linmodel import DiscreteLinearModel
from rwdesat.numerics import lqr_gain, solve_dare, sym_eig_max

__all__ = [
    "MpcConfig",
    "CondensedQp",
    "ExtendedSequence",
    "condense",
    "condensed_cost",
    "pg_solve",
    "warm_start_shift",
    "extend_sequence",
    "TdmpcController",
]


def _default_q_diag() -> tuple[float, ...]:
    return (1.0,) * 6 + (1e-4,) * 4


def _default_r_diag() -> tuple[float, ...]:
    return (1e-8,) * 4


@dataclass(frozen=True)
class MpcConfig:
    """Tuning of the time-distributed MPC.

    Attributes:
        horizon: prediction horizon N in steps.
        ts: sampling period [s].
        q_diag: diagonal state weight (10 entries).
        r_diag: diagonal input weight (4 entries).
        iters: projected-gradient iterations per control step.
        u_max: wheel acceleration bound [rad/s^2].
        warm_start: reuse the shifted previous solution; cold start is
            the all-zero (coasting) sequence either way.
        warm_tail: element appended after the shift, "lqr" (clamped LQR
            feedback at the previous predicted terminal state) or "zero".
            The LQR tail makes the warm start stabilizing on its own;
            the zero tail leaves stabilization entirely to the optimizer
            iterations, which is what makes a minimum iteration budget
            observable at all.
    """

    horizon: int = 5
    ts: float = 10.0
    q_diag: tuple[float, ...] = field(default_factory=_default_q_diag)
    r_diag: tuple[float, ...] = field(default_factory=_default_r_diag)
    iters: int = 6
    u_max: float = 0.5
    warm_start: bool = True
    warm_tail: str = "lqr"

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.ts <= 0.0:
            raise ValueError("sampling period must be positive")
        if len(self.q_diag) != N_STATES or any(q < 0 for q in self.q_diag):
            raise ValueError("q_diag needs 10 nonnegative entries")
        if len(self.r_diag) != N_INPUTS or any(r <= 0 for r in self.r_diag):
            raise ValueError("r_diag needs 4 positive entries")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.u_max <= 0.0:
            raise ValueError("u_max must be positive")
        if self.warm_tail not in ("lqr", "zero"):
            raise ValueError("warm_tail must be 'lqr' or 'zero'")


@dataclass(frozen=True)
class CondensedQp:
    """Condensed quadratic program data for one linearization.

    J(U) = U^T H U + 2 (F xbar0)^T U + xbar0^T (...) xbar0.

    Attributes:
        H: (4N, 4N) Hessian-like matrix (J's quadratic form, no 1/2).
        F: (4N, 10) linear-term map.
        L: lambda_max(H), the projected-gradient step is 1/L.
        phi: (10N, 10) stacked powers Ad^1..Ad^N.
        gamma: (10N, 4N) stacked impulse-response blocks.
    """

    H: np.ndarray
    F: np.ndarray
    L: float
    phi: np.ndarray
    gamma: np.ndarray


def condense(
    dlm: DiscreteLinearModel, cfg: MpcConfig, p_r: np.ndarray
) -> CondensedQp:
    """Condense the horizon-N problem onto the stacked input vector.

    `p_r` is the terminal weight (the Riccati solution for the same
    (Ad, Bd, Q, R) in the nominal setup, but any PSD matrix works).
    """
    ad, bd = dlm.Ad, dlm.Bd
    n, m = N_STATES, N_INPUTS
    nh = cfg.horizon

    phi = np.empty((nh * n, n))
    power = np.eye(n)
    for j in range(nh):
        power = ad @ power
        phi[j * n : (j + 1) * n] = power

    gamma = np.zeros((nh * n, nh * m))
    block = bd.copy()
    for lag in range(nh):
        # block = Ad^lag Bd fills the lag-th subdiagonal.
        for j in range(lag, nh):
            gamma[j * n : (j + 1) * n, (j - lag) * m : (j - lag + 1) * m] = block
        block = ad @ block

    q_blocks = [np.diag(cfg.q_diag)] * (nh - 1) + [np.asarray(p_r)]
    qt = np.zeros((nh * n, nh * n))
    for j, qb in enumerate(q_blocks):
        qt[j * n : (j + 1) * n, j * n : (j + 1) * n] = qb
    rt = np.kron(np.eye(nh), np.diag(cfg.r_diag))

    h = gamma.T @ qt @ gamma + rt
    h = 0.5 * (h + h.T)
    f = gamma.T @ qt @ phi
    lmax, _ = sym_eig_max(h)
    return CondensedQp(H=h, F=f, L=lmax, phi=phi, gamma=gamma)


def condensed_cost(qp: CondensedQp, xbar0: np.ndarray, u: np.ndarray) -> float:
    """U-dependent part of the condensed cost, U^T H U + 2 (F xbar0)^T U.

    The omitted constant does not depend on U, so descent and optimality
    comparisons between input sequences are unaffected.
    """
    u = np.asarray(u, dtype=float)
    return float(u @ (qp.H @ u) + 2.0 * (qp.F @ np.asarray(xbar0, float)) @ u)


def pg_solve(
    qp: CondensedQp,
    xbar0: np.ndarray,
    u_warm: np.ndarray,
    iters: int,
    u_max: float,
) -> np.ndarray:
    """Run `iters` box-projected gradient steps from `u_warm`.

    Every iterate is feasible; the cost never increases because the step
    1/L is the inverse of the largest curvature.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    u = np.asarray(u_warm, dtype=float).copy()
    g0 = qp.F @ np.asarray(xbar0, dtype=float)
    inv_l = 1.0 / qp.L
    for _ in range(iters):
        u -= inv_l * (qp.H @ u + g0)
        np.clip(u, -u_max, u_max, out=u)
    return u


def warm_start_shift(
    u_prev: np.ndarray,
    k: np.ndarray,
    xbar_end: np.ndarray,
    u_max: float,
    tail: str = "lqr",
) -> np.ndarray:
    """Shift the previous stacked solution one step and append a tail.

    The dropped head is the input just applied. The appended element is
    either the clamped LQR feedback -K xbar at the previous predicted
    terminal state, or zero.
    """
    u = np.asarray(u_prev, dtype=float)
    if tail == "zero":
        new = np.zeros(N_INPUTS)
    else:
        new = np.clip(-(k @ np.asarray(xbar_end, dtype=float)), -u_max, u_max)
    return np.concatenate([u[N_INPUTS:], new])


@dataclass(frozen=True)
class ExtendedSequence:
    """MPC inputs continued past the horizon with saturated LQR feedback.

    states[j] is the predicted deviation from x_eq(v) at step j, with
    states[0] = x_base - x_eq(v); inputs[j] drives states[j] to
    states[j+1] through the discrete model, exactly.
    """

    inputs: np.ndarray  # (N_ext, 4)
    states: np.ndarray  # (N_ext + 1, 10)
    x_base: np.ndarray
    v: np.ndarray


def extend_sequence(
    u_mpc: np.ndarray,
    dlm: DiscreteLinearModel,
    k: np.ndarray,
    x_k: np.ndarray,
    v: np.ndarray,
    n_ext: int,
    u_max: float,
    p: SpacecraftParams,
) -> ExtendedSequence:
    """Propagate (x_k, v) through the MPC inputs then the clamped LQR law.

    `u_mpc` is the stacked (4N,) MPC solution; `n_ext >= N` is the total
    number of propagated inputs.
    """
    n_mpc = u_mpc.size // N_INPUTS
    if n_ext < n_mpc:
        raise ValueError(f"n_ext ({n_ext}) must be >= the MPC horizon ({n_mpc})")
    xbar = np.asarray(x_k, dtype=float) - equilibrium(v, p)
    inputs = np.empty((n_ext, N_INPUTS))
    states = np.empty((n_ext + 1, N_STATES))
    states[0] = xbar
    for j in range(n_ext):
        if j < n_mpc:
            u_j = u_mpc[j * N_INPUTS : (j + 1) * N_INPUTS]
        else:
            u_j = np.clip(-(k @ states[j]), -u_max, u_max)
        inputs[j] = u_j
        states[j + 1] = dlm.Ad @ states[j] + dlm.Bd @ u_j
    return ExtendedSequence(
        inputs=inputs, states=states, x_base=np.asarray(x_k, float), v=np.asarray(v, float)
    )


class TdmpcController:
    """Time-distributed MPC with internal warm-start state.

    One instance owns one linearization (built at the target reference r)
    and one warm-start sequence; it is not thread-safe across concurrent
    closed loops, but independent instances are.
    """

    def __init__(
        self,
        dlm: DiscreteLinearModel,
        cfg: MpcConfig,
        p: SpacecraftParams,
    ) -> None:
        self.dlm = dlm
        self.cfg = cfg
        self.params = p
        q = np.diag(cfg.q_diag)
        r = np.diag(cfg.r_diag)
        self.P = solve_dare(dlm.Ad, dlm.Bd, q, r)
        self.K = lqr_gain(dlm.Ad, dlm.Bd, self.P, r)
        self.qp = condense(dlm, cfg, self.P)
        self._u_prev: np.ndarray | None = None
        self._x_end_abs: np.ndarray | None = None

    def reset(self) -> None:
        """Drop the warm start (next solve is a cold start)."""
        self._u_prev = None
        self._x_end_abs = None

    def solve(self, x: np.ndarray, v: np.ndarray, iters: int | None = None) -> np.ndarray:
        """Return the stacked input solution at state x tracking x_eq(v).

        Updates the warm start. The warm-start inputs are physical wheel
        accelerations, so they carry over unchanged when v moves; the
        stored predicted terminal state is kept in absolute coordinates
        and re-referenced to the current v.
        """
        n = self.cfg.horizon * N_INPUTS
        x_eq = equilibrium(v, self.params)
        xbar = np.asarray(x, dtype=float) - x_eq

        if self.cfg.warm_start and self._u_prev is not None:
            u0 = warm_start_shift(
                self._u_prev,
                self.K,
                self._x_end_abs - x_eq,
                self.cfg.u_max,
                tail=self.cfg.warm_tail,
            )
        else:
            u0 = np.zeros(n)

        u = pg_solve(self.qp, xbar, u0, iters or self.cfg.iters, self.cfg.u_max)

        xbar_end = (
            self.qp.phi[-N_STATES:, :] @ xbar + self.qp.gamma[-N_STATES:, :] @ u
        )
        self._u_prev = u
        self._x_end_abs = xbar_end + x_eq
        return u

    def step(self, x: np.ndarray, v: np.ndarray, iters: int | None = None) -> np.ndarray:
        """Solve and return only the first input (receding horizon use)."""
        return self.solve(x, v, iters)[:N_INPUTS]
