"""Linearization about the equilibrium family and exact ZOH discretization.

Two independent routes to the continuous-time (A, B) pair exist on
purpose: `linearize_analytic` evaluates the closed-form Jacobian of the
nonlinear model at x_eq(r), and `linearize_numeric` central-differences
the nonlinear right-hand side. `linearize` compares them and falls back
to the numeric result if they disagree beyond tolerance, since the
nonlinear model is the ground truth.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from rwdesat.dynamics import (
    N_INPUTS,
    N_STATES,
    SpacecraftParams,
    eom_rhs,
    equilibrium,
)
from rwdesat.numerics import expm

__all__ = [
    "ContinuousLinearModel",
    "DiscreteLinearModel",
    "linearize_analytic",
    "linearize_numeric",
    "linearize",
    "discretize_zoh",
]

_logger = logging.getLogger(__name__)

# Default agreement tolerance between the analytic and numeric Jacobians:
# per entry, max(ANALYTIC_REL_TOL * |entry|, ANALYTIC_ABS_TOL).
ANALYTIC_REL_TOL = 1e-6
ANALYTIC_ABS_TOL = 1e-9


@dataclass(frozen=True)
class ContinuousLinearModel:
    """Continuous-time deviation model dxbar/dt = A xbar + B u at x_eq(r)."""

    A: np.ndarray
    B: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class DiscreteLinearModel:
    """Sampled-data model xbar[k+1] = Ad xbar[k] + Bd u[k] at period Ts."""

    Ad: np.ndarray
    Bd: np.ndarray
    Ts: float
    r: np.ndarray


def linearize_analytic(p: SpacecraftParams, r: np.ndarray) -> ContinuousLinearModel:
    """Closed-form Jacobian of the dynamics at x_eq(r).

    The wheel-speed command enters A through the wheel-momentum coupling
    of the body rates (entries (4,6) and (6,4) in 1-based indexing);
    everything else depends only on the spacecraft parameters.
    """
    r = np.asarray(r, dtype=float)
    a_sum = float(r[0] + r[1])
    n, js = p.n, p.Js
    ca, sa = math.cos(p.alpha), math.sin(p.alpha)
    cb, sb = math.cos(p.beta), math.sin(p.beta)

    A = np.zeros((N_STATES, N_STATES))
    # Kinematics rows: deviation of the 3-2-1 rates about the equilibrium.
    A[0, 2] = n
    A[0, 3] = 1.0
    A[1, 4] = 1.0
    A[2, 0] = -n
    A[2, 5] = 1.0

    e4 = n * js / p.J1
    e5 = n * js / p.J2
    e6 = n * js / p.J3

    a41 = -3.0 * n * (p.J2 - p.J3) / js
    a52 = -3.0 * n * (p.J1 - p.J3) / js
    a46 = (p.J3 - p.J2) / js - 2.0 * sa * a_sum / n
    a64 = (p.J2 - p.J1) / js + 2.0 * sa * a_sum / n

    A[3, 0] = e4 * a41
    A[3, 5] = e4 * a46
    A[3, 6:10] = e4 * np.array([ca * cb, -ca * sb, -ca * cb, ca * sb])
    A[4, 1] = e5 * a52
    A[5, 3] = e6 * a64
    A[5, 6:10] = e6 * np.array([-ca * sb, -ca * cb, ca * sb, ca * cb])

    B = np.zeros((N_STATES, N_INPUTS))
    B[3] = (js / p.J1) * np.array([-ca * sb, -ca * cb, ca * sb, ca * cb])
    B[4] = (js / p.J2) * np.array([sa, sa, sa, sa])
    B[5] = (js / p.J3) * np.array([-ca * cb, ca * sb, ca * cb, -ca * sb])
    B[6:10, :] = np.eye(4)

    return ContinuousLinearModel(A=A, B=B, r=r)


def linearize_numeric(
    p: SpacecraftParams,
    r: np.ndarray,
    h: float = 1e-5,
    x0: np.ndarray | None = None,
) -> ContinuousLinearModel:
    """Central finite-difference Jacobian of the dynamics at x_eq(r).

    The step for each column is scaled by max(1, |x_i|) so large wheel
    speeds do not starve the difference of significant digits. `x0`
    overrides the expansion point (testing hook); it must still be an
    equilibrium.

    Raises:
        ValueError: if the expansion point is not an equilibrium
            (residual >= 1e-10), since the Jacobian of f about a
            non-stationary point would not define a deviation model.
    """
    if h <= 0.0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    r = np.asarray(r, dtype=float)
    if x0 is None:
        x0 = equilibrium(r, p)
    else:
        x0 = np.asarray(x0, dtype=float)
    u0 = np.zeros(N_INPUTS)

    residual = np.max(np.abs(eom_rhs(x0, u0, p)))
    if residual >= 1e-10:
        raise ValueError(
            f"linearization point is not an equilibrium: |f|_inf = {residual:.3e}"
        )

    A = np.empty((N_STATES, N_STATES))
    for i in range(N_STATES):
        hi = h * max(1.0, abs(x0[i]))
        xp, xm = x0.copy(), x0.copy()
        xp[i] += hi
        xm[i] -= hi
        A[:, i] = (eom_rhs(xp, u0, p) - eom_rhs(xm, u0, p)) / (2.0 * hi)

    B = np.empty((N_STATES, N_INPUTS))
    for j in range(N_INPUTS):
        up, um = u0.copy(), u0.copy()
        up[j] += h
        um[j] -= h
        B[:, j] = (eom_rhs(x0, up, p) - eom_rhs(x0, um, p)) / (2.0 * h)

    return ContinuousLinearModel(A=A, B=B, r=r)


def _jacobian_mismatch(
    analytic: ContinuousLinearModel, numeric: ContinuousLinearModel
) -> float:
    """Worst entrywise excess over the agreement tolerance (<= 0 means agree)."""
    worst = -np.inf
    for ma, mn in ((analytic.A, numeric.A), (analytic.B, numeric.B)):
        tol = np.maximum(ANALYTIC_REL_TOL * np.abs(ma), ANALYTIC_ABS_TOL)
        worst = max(worst, float(np.max(np.abs(ma - mn) - tol)))
    return worst


def linearize(p: SpacecraftParams, r: np.ndarray) -> ContinuousLinearModel:
    """Linearize at x_eq(r), cross-checking analytic against numeric.

    The nonlinear model is the ground truth: if the closed-form matrices
    disagree with the finite-difference Jacobian beyond tolerance, the
    numeric result wins and a warning is logged.
    """
    analytic = linearize_analytic(p, r)
    numeric = linearize_numeric(p, r)
    excess = _jacobian_mismatch(analytic, numeric)
    if excess > 0.0:
        _logger.warning(
            "analytic Jacobian disagrees with finite differences "
            "(worst excess %.3e); using the numeric Jacobian",
            excess,
        )
        return numeric
    return analytic


def discretize_zoh(m: ContinuousLinearModel, ts: float) -> DiscreteLinearModel:
    """Exact zero-order-hold discretization via the augmented exponential.

    exp([[A, B], [0, 0]] * Ts) = [[Ad, Bd], [0, I]].
    """
    if ts <= 0.0:
        raise ValueError(f"sample period must be positive, got {ts}")
    n, m_in = m.A.shape[0], m.B.shape[1]
    block = np.zeros((n + m_in, n + m_in))
    block[:n, :n] = m.A
    block[:n, n:] = m.B
    phi = expm(block * ts)
    return DiscreteLinearModel(
        Ad=phi[:n, :n], Bd=phi[:n, n:], Ts=float(ts), r=m.r
    )
