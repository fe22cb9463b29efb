"""Incremental reference governor wrapped around the time-distributed MPC.

The governor ramps the applied wheel-speed reference v from its initial
value toward the target r in fixed increments. A candidate increment is
applied only if the predicted closed-loop trajectory from the current
state, extended past the MPC horizon with saturated LQR feedback,
satisfies the state constraints at every visited step and lands in an
ellipsoidal LQR-invariant set around the candidate equilibrium. When the
candidate fails, the previously accepted input sequence is replayed; once
it runs out, saturated LQR feedback about the frozen reference takes
over.

Constraint checks run on the linear prediction model by default. A
nonlinear-prediction switch exists for validation runs at a much higher
computational price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rwdesat.dynamics import (
    N_INPUTS,
    N_STATES,
    SpacecraftParams,
    equilibrium,
    propagate_zoh,
)
from rwdesat.linmodel import DiscreteLinearModel
from rwdesat.tdmpc import ExtendedSequence, TdmpcController

__all__ = [
    "ConstraintSet",
    "TerminalSet",
    "RgConfig",
    "GovernorState",
    "InitialReferenceError",
    "reference_increment",
    "increment_and_project",
    "terminal_membership",
    "admissible",
    "RgTdmpcController",
    "calibrate_terminal_level",
    "find_admissible_level",
    "CalibrationResult",
]


class InitialReferenceError(RuntimeError):
    """The initial reference is not admissible at the initial state."""


@dataclass(frozen=True)
class ConstraintSet:
    """State and input constraints for desaturation maneuvers.

    Attributes:
        pointing: bound on |roll|, |pitch|, |yaw| [rad].
        input: wheel acceleration bound [rad/s^2].
        zero_signs: optional per-wheel signs (+1/-1); when set, wheel i
            must keep sign(zero_signs[i]) * Om_i >= zero_margin, which
            forbids spin-direction reversals with a safety margin.
        zero_margin: wheel speed margin [rad/s] for the sign constraint.
    """

    pointing: float = 0.1
    input: float = 0.5
    zero_signs: tuple[int, ...] | None = None
    zero_margin: float = 0.3

    def __post_init__(self) -> None:
        if self.pointing <= 0.0 or self.input <= 0.0:
            raise ValueError("constraint bounds must be positive")
        if self.zero_margin < 0.0:
            raise ValueError("zero-crossing margin must be nonnegative")
        if self.zero_signs is not None:
            if len(self.zero_signs) != 4 or any(s not in (-1, 1) for s in self.zero_signs):
                raise ValueError("zero_signs needs four entries from {-1, +1}")

    def deviation_bounds(
        self, v: np.ndarray, p: SpacecraftParams, slack: float = 0.0
    ) -> tuple[np.ndarray, np.ndarray]:
        """Elementwise state-constraint box in deviation coordinates.

        Pointing and zero-crossing constraints are all axis-aligned, so
        membership of (xbar + x_eq(v)) in the constraint set reduces to a
        box test on xbar. Unconstrained coordinates get infinite bounds.
        `slack` tightens every bound relatively; the prediction model is
        linear while the plant is not, and boundary-riding maneuvers need
        the mismatch absorbed on the prediction side.
        """
        lo = np.full(N_STATES, -np.inf)
        hi = np.full(N_STATES, np.inf)
        pointing = self.pointing * (1.0 - slack)
        margin = self.zero_margin * (1.0 + slack)
        lo[0:3] = -pointing
        hi[0:3] = pointing
        if self.zero_signs is not None:
            x_eq = equilibrium(v, p)
            for i, s in enumerate(self.zero_signs):
                idx = 6 + i
                if s > 0:
                    lo[idx] = margin - x_eq[idx]
                else:
                    hi[idx] = -margin - x_eq[idx]
        return lo, hi

    def state_margins(self, x: np.ndarray) -> dict[str, float]:
        """Signed distances of an absolute state to each constraint boundary."""
        margins = {"pointing": self.pointing - float(np.max(np.abs(x[0:3])))}
        if self.zero_signs is not None:
            margins["zerocross"] = float(
                min(s * x[6 + i] - self.zero_margin for i, s in enumerate(self.zero_signs))
            )
        return margins


@dataclass(frozen=True)
class TerminalSet:
    """Ellipsoidal terminal set {x : (x - x_eq(v))' P_F (x - x_eq(v)) <= c_F}."""

    P_F: np.ndarray
    c_F: float

    def contains_dev(self, xbar: np.ndarray) -> bool:
        return float(xbar @ self.P_F @ xbar) <= self.c_F


@dataclass(frozen=True)
class RgConfig:
    """Reference governor tuning.

    Attributes:
        n_rg: admissibility horizon in steps while v != r.
        stride: terminal-set membership is tested at the MPC horizon and
            every `stride` steps after, allowing early termination.
        increment_factor: magnitude factor of the reference increment.
        c_f: terminal-set level while ramping.
        c_f_tight: tightened level used at v = r in oscillation-rejection
            mode, which filters input updates that would throw the
            predicted horizon-end state far from the set point.
        oscillation_rejection: enable the tightened endgame check.
        nonlinear_prediction: propagate admissibility predictions with
            the nonlinear model (validation use; much slower).
        prediction_slack: relative tightening of the state bounds used
            inside admissibility predictions; absorbs the linear-model
            vs nonlinear-plant mismatch so enforced bounds hold on the
            plant itself.
        calibrate_terminal: verify c_f by Monte-Carlo rollout at
            controller construction and cap it to the largest level that
            actually keeps LQR trajectories from the set within 1 rad/s
            wheel deviation and free of pointing/input violations. A set
            failing that property makes the early-exit acceptance test
            blind to downstream constraint violations.
        calibration_seed: RNG seed of the calibration rollouts.
    """

    n_rg: int = 3000
    stride: int = 50
    increment_factor: float = 0.3
    c_f: float = 1e10
    c_f_tight: float = 1e5
    oscillation_rejection: bool = False
    nonlinear_prediction: bool = False
    prediction_slack: float = 1e-3
    calibrate_terminal: bool = True
    calibration_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rg < 1 or self.stride < 1:
            raise ValueError("n_rg and stride must be >= 1")
        if self.increment_factor <= 0.0:
            raise ValueError("increment_factor must be positive")
        if self.c_f <= 0.0 or self.c_f_tight <= 0.0:
            raise ValueError("terminal levels must be positive")
        if not 0.0 <= self.prediction_slack < 1.0:
            raise ValueError("prediction_slack must be in [0, 1)")


@dataclass
class GovernorState:
    """Mutable bookkeeping of one closed-loop governor instance."""

    v_current: np.ndarray
    v0: np.ndarray
    r: np.ndarray
    k_prime: int = 0
    stored: ExtendedSequence | None = None
    step_index: int = 0


def reference_increment(
    v0: np.ndarray, r: np.ndarray, factor: float = 0.3
) -> np.ndarray:
    """Fixed reference increment, oriented from v0 toward r.

    The dominant coordinate moves by `factor` per accepted step; the
    other scales with the square of its relative distance, so both
    coordinates arrive at r together-ish.
    """
    v0 = np.asarray(v0, dtype=float)
    r = np.asarray(r, dtype=float)
    gap = r - v0
    denom = float(np.max(np.abs(gap))) ** 2
    if denom == 0.0:
        raise ValueError("reference increment undefined for v0 == r")
    return factor * gap * np.abs(gap) / denom


def increment_and_project(
    v_prev: np.ndarray, delta: np.ndarray, v0: np.ndarray, r: np.ndarray
) -> np.ndarray:
    """Apply the increment and clamp each coordinate to [v0_j, r_j]."""
    lo = np.minimum(v0, r)
    hi = np.maximum(v0, r)
    return np.clip(np.asarray(v_prev, float) + delta, lo, hi)


def terminal_membership(
    x: np.ndarray, v: np.ndarray, tset: TerminalSet, p: SpacecraftParams
) -> bool:
    """Ellipsoid membership test for an absolute state about x_eq(v)."""
    return tset.contains_dev(np.asarray(x, float) - equilibrium(v, p))


def _extend_nonlinear(
    x_k: np.ndarray,
    v: np.ndarray,
    dlm: DiscreteLinearModel,
    k_gain: np.ndarray,
    u_max: float,
    p: SpacecraftParams,
    n_ext: int,
    u_mpc: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Nonlinear-prediction variant of the extension (validation path)."""
    x_eq = equilibrium(v, p)
    dt = dlm.Ts / 10.0
    x_abs = np.asarray(x_k, dtype=float).copy()
    inputs = np.empty((n_ext, N_INPUTS))
    states = np.empty((n_ext + 1, N_STATES))
    states[0] = x_abs - x_eq
    n_mpc = u_mpc.size // N_INPUTS
    for j in range(n_ext):
        if j < n_mpc:
            u_j = u_mpc[j * N_INPUTS : (j + 1) * N_INPUTS]
        else:
            u_j = np.clip(-(k_gain @ states[j]), -u_max, u_max)
        inputs[j] = u_j
        x_abs = propagate_zoh(x_abs, u_j, dlm.Ts, dt, p)
        states[j + 1] = x_abs - x_eq
    return inputs, states


def admissible(
    x_k: np.ndarray,
    v_plus: np.ndarray,
    u_mpc: np.ndarray,
    dlm: DiscreteLinearModel,
    k_gain: np.ndarray,
    constraints: ConstraintSet,
    tset: TerminalSet,
    rg: RgConfig,
    p: SpacecraftParams,
    n_mpc: int,
    u_max: float,
    n_rg: int | None = None,
) -> tuple[bool, ExtendedSequence | None, int]:
    """Check constraint admissibility of the extended trajectory at v_plus.

    Builds the extension incrementally. Returns (accepted, sequence,
    visited) where `visited` counts propagated steps; the check stops at
    the first state-constraint violation, or accepts early when a
    terminal-set test (at step n_mpc, then every `stride`) passes with
    all earlier states feasible.
    """
    horizon = rg.n_rg if n_rg is None else n_rg
    x_eq = equilibrium(v_plus, p)
    lo, hi = constraints.deviation_bounds(v_plus, p, slack=rg.prediction_slack)
    finite = np.isfinite(lo) | np.isfinite(hi)
    idx = np.nonzero(finite)[0]
    lo_f, hi_f = lo[idx], hi[idx]

    if rg.nonlinear_prediction:
        inputs, states = _extend_nonlinear(
            x_k, v_plus, dlm, k_gain, u_max, p, horizon, u_mpc
        )
        # Constraint scan over the precomputed nonlinear prediction.
        for j in range(horizon):
            xj = states[j][idx]
            if np.any(xj < lo_f) or np.any(xj > hi_f):
                return False, None, j + 1
            if _is_check_index(j + 1, n_mpc, rg.stride, horizon) and tset.contains_dev(
                states[j + 1]
            ):
                seq = ExtendedSequence(
                    inputs=inputs[: j + 1],
                    states=states[: j + 2],
                    x_base=np.asarray(x_k, float),
                    v=np.asarray(v_plus, float),
                )
                return True, seq, j + 1
        return False, None, horizon

    xbar = np.asarray(x_k, dtype=float) - x_eq
    ad, bd = dlm.Ad, dlm.Bd
    inputs = np.empty((horizon, N_INPUTS))
    states = np.empty((horizon + 1, N_STATES))
    states[0] = xbar
    for j in range(horizon):
        xj = states[j][idx]
        if np.any(xj < lo_f) or np.any(xj > hi_f):
            return False, None, j + 1
        if j < n_mpc:
            u_j = u_mpc[j * N_INPUTS : (j + 1) * N_INPUTS]
        else:
            u_j = np.clip(-(k_gain @ states[j]), -u_max, u_max)
        inputs[j] = u_j
        states[j + 1] = ad @ states[j] + bd @ u_j
        if _is_check_index(j + 1, n_mpc, rg.stride, horizon) and tset.contains_dev(
            states[j + 1]
        ):
            seq = ExtendedSequence(
                inputs=inputs[: j + 1].copy(),
                states=states[: j + 2].copy(),
                x_base=np.asarray(x_k, float),
                v=np.asarray(v_plus, float),
            )
            return True, seq, j + 1
    return False, None, horizon


def _is_check_index(j: int, n_mpc: int, stride: int, horizon: int) -> bool:
    """Terminal membership is tested at n_mpc, n_mpc + stride, ... and horizon."""
    if j == horizon:
        return True
    return j >= n_mpc and (j - n_mpc) % stride == 0


@dataclass(frozen=True)
class StepInfo:
    """Per-step governor telemetry."""

    v: np.ndarray
    branch: str  # "accepted" | "replay" | "lqr"
    admissible: bool
    visited: int


class RgTdmpcController:
    """Reference-governor-augmented TDMPC for one closed-loop run.

    Owns a TdmpcController (and its warm start), the governor state, and
    the terminal set. `start` must be called once with the initial state;
    it validates that the initial reference is admissible.
    """

    def __init__(
        self,
        tdmpc: TdmpcController,
        constraints: ConstraintSet,
        p_f: np.ndarray,
        rg: RgConfig,
        r: np.ndarray,
        p: SpacecraftParams,
    ) -> None:
        self.tdmpc = tdmpc
        self.constraints = constraints
        self.rg = rg
        self.p = p
        self.r = np.asarray(r, dtype=float)
        self.p_f = p_f
        self.gs: GovernorState | None = None
        self._delta: np.ndarray | None = None
        self.calibration: CalibrationResult | None = None
        self.c_f_effective = rg.c_f
        if rg.calibrate_terminal and math.isfinite(rg.c_f):
            self.c_f_effective, self.calibration = find_admissible_level(
                tdmpc.dlm,
                tdmpc.K,
                p_f,
                rg.c_f,
                constraints,
                tdmpc.cfg.u_max,
                seed=rg.calibration_seed,
            )

    def _tset(self, level: float) -> TerminalSet:
        return TerminalSet(P_F=self.p_f, c_F=level)

    def _mode(self, at_target: bool) -> tuple[int, float]:
        """Admissibility horizon and terminal level for the current phase."""
        if at_target:
            level = (
                self.rg.c_f_tight
                if self.rg.oscillation_rejection
                else self.c_f_effective
            )
            return self.tdmpc.cfg.horizon, level
        return self.rg.n_rg, self.c_f_effective

    def start(self, x0: np.ndarray, v0: np.ndarray) -> None:
        """Validate v0 at x0 and store its sequence as the replay fallback.

        Raises:
            InitialReferenceError: if the extended trajectory at
                (x0, v0) is not constraint admissible.
        """
        v0 = np.asarray(v0, dtype=float)
        n_rg, level = self._mode(np.array_equal(v0, self.r))
        u = self.tdmpc.solve(x0, v0)
        ok, seq, visited = admissible(
            x0,
            v0,
            u,
            self.tdmpc.dlm,
            self.tdmpc.K,
            self.constraints,
            self._tset(level),
            self.rg,
            self.p,
            self.tdmpc.cfg.horizon,
            self.tdmpc.cfg.u_max,
            n_rg=n_rg,
        )
        if not ok:
            raise InitialReferenceError(
                f"initial reference {v0} is not admissible at the initial state "
                f"(prediction failed after {visited} steps)"
            )
        self.gs = GovernorState(v_current=v0, v0=v0, r=self.r, k_prime=0, stored=seq)
        if not np.array_equal(v0, self.r):
            self._delta = reference_increment(v0, self.r, self.rg.increment_factor)
        # The start solve warmed up the TDMPC; keep that warm start.

    def step(self, x_k: np.ndarray, iters: int | None = None) -> tuple[np.ndarray, StepInfo]:
        """One governor step: returns (u_k, telemetry).

        Call once per sampling instant, in order.
        """
        if self.gs is None:
            raise RuntimeError("call start(x0, v0) before stepping")
        gs = self.gs
        k = gs.step_index

        at_target = np.array_equal(gs.v_current, gs.r)
        n_rg, level = self._mode(at_target)
        if at_target:
            v_plus = gs.r
        else:
            v_plus = increment_and_project(gs.v_current, self._delta, gs.v0, gs.r)

        u_stack = self.tdmpc.solve(x_k, v_plus, iters)
        ok, seq, visited = admissible(
            x_k,
            v_plus,
            u_stack,
            self.tdmpc.dlm,
            self.tdmpc.K,
            self.constraints,
            self._tset(level),
            self.rg,
            self.p,
            self.tdmpc.cfg.horizon,
            self.tdmpc.cfg.u_max,
            n_rg=n_rg,
        )

        if ok:
            gs.v_current = np.asarray(v_plus, float)
            gs.k_prime = k
            gs.stored = seq
            u = seq.inputs[0]
            branch = "accepted"
        else:
            age = k - gs.k_prime
            if gs.stored is not None and age < self.tdmpc.cfg.horizon and age < len(
                gs.stored.inputs
            ):
                u = gs.stored.inputs[age]
                branch = "replay"
            else:
                xbar = x_k - equilibrium(gs.v_current, self.p)
                u = np.clip(
                    -(self.tdmpc.K @ xbar),
                    -self.tdmpc.cfg.u_max,
                    self.tdmpc.cfg.u_max,
                )
                branch = "lqr"

        gs.step_index += 1
        return u, StepInfo(
            v=gs.v_current.copy(), branch=branch, admissible=ok, visited=visited
        )


@dataclass(frozen=True)
class CalibrationResult:
    """Monte-Carlo verification of a terminal-set level.

    `ok` means every sampled boundary trajectory under the saturated LQR
    law kept wheel speeds within `wheel_dev_limit` of the reference and
    produced no pointing violation or unsaturated-input excess.
    `suggested_c_f` scales the level by the worst wheel-deviation ratio
    (exact for the unsaturated linear loop).
    """

    ok: bool
    worst_wheel_dev: float
    pointing_violations: int
    input_violations: int
    suggested_c_f: float


def find_admissible_level(
    dlm: DiscreteLinearModel,
    k_gain: np.ndarray,
    p_f: np.ndarray,
    c_f: float,
    constraints: ConstraintSet,
    u_max: float,
    wheel_dev_limit: float = 1.0,
    seed: int = 0,
    max_refinements: int = 8,
) -> tuple[float, CalibrationResult]:
    """Largest verified terminal level not exceeding c_f.

    Verifies c_f with `calibrate_terminal_level`; on failure, walks down
    through the suggested levels until the rollout check passes, then
    grows the level geometrically to approach the admissibility boundary
    from below. Returns the accepted level and its calibration evidence.
    """

    def verify(level: float) -> CalibrationResult:
        return calibrate_terminal_level(
            dlm, k_gain, p_f, level, constraints, u_max, wheel_dev_limit, seed=seed
        )

    cal = verify(c_f)
    if cal.ok:
        return c_f, cal

    level = c_f
    for _ in range(max_refinements):
        level = min(level, cal.suggested_c_f) * 0.9
        cal = verify(level)
        if cal.ok:
            break
    if not cal.ok:
        return level, cal

    # Grow back toward the failure boundary; keep the last passing level.
    best, best_cal = level, cal
    for _ in range(max_refinements):
        trial = min(best * 1.4, c_f)
        if trial <= best:
            break
        trial_cal = verify(trial)
        if not trial_cal.ok:
            break
        best, best_cal = trial, trial_cal
    return best, best_cal


def calibrate_terminal_level(
    dlm: DiscreteLinearModel,
    k_gain: np.ndarray,
    p_f: np.ndarray,
    c_f: float,
    constraints: ConstraintSet,
    u_max: float,
    wheel_dev_limit: float = 1.0,
    n_samples: int = 1000,
    horizon: int = 3000,
    seed: int = 0,
) -> CalibrationResult:
    """Check the terminal level against its design intent by sampling.

    Draws `n_samples` states on the ellipsoid boundary, rolls each out
    under the saturated LQR law, and measures worst wheel-speed deviation
    plus pointing and input-bound violations along the way.
    """
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((N_STATES, n_samples))
    quad = np.einsum("in,ij,jn->n", y, p_f, y)
    x = y * np.sqrt(c_f / quad)

    worst_wheel = 0.0
    pointing_bad = 0
    input_bad = 0
    pointing_seen = np.zeros(n_samples, dtype=bool)
    input_seen = np.zeros(n_samples, dtype=bool)
    for _ in range(horizon):
        wheel_dev = np.max(np.abs(x[6:10]), axis=0)
        worst_wheel = max(worst_wheel, float(np.max(wheel_dev)))
        pointing_seen |= np.max(np.abs(x[0:3]), axis=0) > constraints.pointing
        u_raw = -(k_gain @ x)
        input_seen |= np.max(np.abs(u_raw), axis=0) > u_max
        u = np.clip(u_raw, -u_max, u_max)
        x = dlm.Ad @ x + dlm.Bd @ u
    pointing_bad = int(np.sum(pointing_seen))
    input_bad = int(np.sum(input_seen))

    ok = worst_wheel <= wheel_dev_limit and pointing_bad == 0 and input_bad == 0
    ratio = wheel_dev_limit / worst_wheel if worst_wheel > 0 else math.inf
    return CalibrationResult(
        ok=ok,
        worst_wheel_dev=worst_wheel,
        pointing_violations=pointing_bad,
        input_violations=input_bad,
        suggested_c_f=c_f * ratio * ratio,
    )
