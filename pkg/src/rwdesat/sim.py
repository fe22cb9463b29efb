"""Closed-loop scenario execution on the nonlinear plant, with trace export.

The controller runs at the sampling period Ts under zero-order hold; the
plant is advanced between samples with fixed-step RK4 substeps. Traces
record states, inputs, the applied reference, governor decisions,
constraint margins, and per-call controller wall time; runs are
deterministic for a given scenario (wall times excepted).

Trace CSV schema (one row per sampling instant, final state included):

    t_s, phi, theta, psi, w1, w2, w3, Om1, Om2, Om3, Om4,
    u1, u2, u3, u4, v1, v2, branch, admissible,
    margin_pointing, margin_input, margin_zerocross, t_ctrl_s

The final row carries the terminal state with NaN inputs, branch "end"
and NaN controller time. Floats are written with 17 significant digits,
so re-importing reproduces the doubles bit-exactly. margin_zerocross is
NaN when the constraint is inactive.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from rwdesat.dynamics import (
    N_INPUTS,
    N_STATES,
    SpacecraftParams,
    propagate_zoh,
)
from rwdesat.governor import (
    ConstraintSet,
    RgConfig,
    RgTdmpcController,
)
from rwdesat.linmodel import discretize_zoh, linearize
from rwdesat.numerics import solve_dlyap, closed_loop_matrix
from rwdesat.tdmpc import MpcConfig, TdmpcController

__all__ = [
    "ScenarioConfig",
    "SimTrace",
    "ConstraintReport",
    "run_closed_loop",
    "check_trace",
    "export_csv",
    "import_csv",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "completion_time",
    "settling_time",
    "total_variation",
    "TRACE_CSV_COLUMNS",
]

TRACE_CSV_COLUMNS = (
    ["t_s", "phi", "theta", "psi", "w1", "w2", "w3", "Om1", "Om2", "Om3", "Om4"]
    + ["u1", "u2", "u3", "u4", "v1", "v2", "branch", "admissible"]
    + ["margin_pointing", "margin_input", "margin_zerocross", "t_ctrl_s"]
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one closed-loop run.

    Attributes:
        params: spacecraft and wheel-array parameters.
        x0: initial state (10 entries).
        r: target wheel-pair reference (a, b) [rad/s].
        controller: "tdmpc" (tracks r directly) or "rgtdmpc".
        mpc: MPC tuning.
        rg: governor tuning (ignored for plain TDMPC).
        constraints: constraint set used by the governor and the
            post-run checker.
        duration_orbits: run length in orbital periods.
        seed: RNG seed for the random iteration-count experiment.
        l_random: when set, (low, high) bounds of the uniform integer
            draw replacing the fixed per-step optimizer budget.
        substeps: RK4 substeps per sampling interval.
        v0: initial applied reference; default pairs-average of the
            initial wheel speeds.
    """

    params: SpacecraftParams = field(default_factory=SpacecraftParams)
    x0: tuple[float, ...] = (0.0,) * N_STATES
    r: tuple[float, float] = (0.0, 0.0)
    controller: str = "rgtdmpc"
    mpc: MpcConfig = field(default_factory=MpcConfig)
    rg: RgConfig = field(default_factory=RgConfig)
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    duration_orbits: float = 10.0
    seed: int = 0
    l_random: tuple[int, int] | None = None
    substeps: int = 10
    v0: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.controller not in ("tdmpc", "rgtdmpc"):
            raise ValueError(f"unknown controller {self.controller!r}")
        if len(self.x0) != N_STATES:
            raise ValueError("x0 needs 10 entries")
        if not all(math.isfinite(v) for v in self.x0):
            raise ValueError("x0 entries must be finite")
        if self.duration_orbits <= 0.0:
            raise ValueError("duration must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.l_random is not None:
            lo, hi = self.l_random
            if lo < 1 or hi < lo:
                raise ValueError("l_random bounds must satisfy 1 <= low <= high")
        if self.constraints.zero_signs is not None:
            for i, s in enumerate(self.constraints.zero_signs):
                if s * self.x0[6 + i] <= 0.0:
                    raise ValueError(
                        f"zero-crossing sign {s} inconsistent with initial "
                        f"wheel speed {self.x0[6 + i]} (wheel {i + 1})"
                    )

    def initial_reference(self) -> np.ndarray:
        if self.v0 is not None:
            return np.asarray(self.v0, dtype=float)
        x0 = np.asarray(self.x0)
        return np.array([(x0[6] + x0[8]) / 2.0, (x0[7] + x0[9]) / 2.0])


@dataclass
class SimTrace:
    """Time-indexed record of one closed-loop run.

    Arrays are indexed by sampling instant; `states` has one more row
    than `inputs` (the terminal state). `visited` holds the number of
    prediction steps examined by the governor's admissibility check
    (0 for plain TDMPC), and `substep_pointing` the worst pointing margin
    seen on the RK4 substep grid inside each interval.
    """

    t: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    v: np.ndarray
    branch: list[str]
    admissible: np.ndarray
    visited: np.ndarray
    ctrl_time: np.ndarray
    substep_pointing: np.ndarray
    config: ScenarioConfig | None = None

    @property
    def n_steps(self) -> int:
        return self.inputs.shape[0]


def _build_controllers(sc: ScenarioConfig):
    clm = linearize(sc.params, np.asarray(sc.r, float))
    dlm = discretize_zoh(clm, sc.mpc.ts)
    tdmpc = TdmpcController(dlm, sc.mpc, sc.params)
    if sc.controller == "tdmpc":
        return tdmpc, None
    acl = closed_loop_matrix(dlm.Ad, dlm.Bd, tdmpc.K)
    p_f = solve_dlyap(acl, np.eye(N_STATES))
    rgc = RgTdmpcController(
        tdmpc, sc.constraints, p_f, sc.rg, np.asarray(sc.r, float), sc.params
    )
    return tdmpc, rgc


def run_closed_loop(sc: ScenarioConfig) -> SimTrace:
    """Run the configured scenario and return its trace.

    Deterministic for fixed config and seed; controller wall times are
    the only non-reproducible fields.
    """
    p = sc.params
    n_steps = int(round(sc.duration_orbits * p.orbit_period / sc.mpc.ts))
    if n_steps < 1:
        raise ValueError(
            f"duration of {sc.duration_orbits} orbits covers no control step "
            f"at Ts = {sc.mpc.ts} s"
        )
    dt_sub = sc.mpc.ts / sc.substeps
    rng = np.random.default_rng(sc.seed)

    tdmpc, governor = _build_controllers(sc)

    x = np.asarray(sc.x0, dtype=float).copy()
    r = np.asarray(sc.r, dtype=float)
    v0 = sc.initial_reference()
    if governor is not None:
        governor.start(x, v0)

    t = np.arange(n_steps + 1) * sc.mpc.ts
    states = np.empty((n_steps + 1, N_STATES))
    inputs = np.empty((n_steps, N_INPUTS))
    v_hist = np.empty((n_steps, 2))
    branch: list[str] = []
    adm = np.zeros(n_steps, dtype=bool)
    visited = np.zeros(n_steps, dtype=int)
    ctrl_time = np.empty(n_steps)
    substep_pointing = np.empty(n_steps)

    states[0] = x
    for k in range(n_steps):
        iters = int(rng.integers(sc.l_random[0], sc.l_random[1] + 1)) if sc.l_random else None
        tic = time.perf_counter()
        if governor is None:
            u = tdmpc.step(x, r, iters)
            v_k = r
            branch.append("tdmpc")
        else:
            u, info = governor.step(x, iters)
            v_k = info.v
            branch.append(info.branch)
            adm[k] = info.admissible
            visited[k] = info.visited
        ctrl_time[k] = time.perf_counter() - tic

        inputs[k] = u
        v_hist[k] = v_k

        worst_pointing = math.inf
        for _ in range(sc.substeps):
            x = propagate_zoh(x, u, dt_sub, dt_sub, p)
            worst_pointing = min(
                worst_pointing, sc.constraints.pointing - float(np.max(np.abs(x[0:3])))
            )
        substep_pointing[k] = worst_pointing
        states[k + 1] = x

    return SimTrace(
        t=t,
        states=states,
        inputs=inputs,
        v=v_hist,
        branch=branch,
        admissible=adm,
        visited=visited,
        ctrl_time=ctrl_time,
        substep_pointing=substep_pointing,
        config=sc,
    )


@dataclass(frozen=True)
class ConstraintRecord:
    """Worst margin and first violation of one constraint over a trace."""

    worst_margin: float
    first_violation_t: float | None
    violations: int


@dataclass(frozen=True)
class ConstraintReport:
    """Per-constraint margins evaluated at the sampling instants.

    `intersample_pointing` reports the worst pointing margin seen on the
    substep grid, which the sampled-data constraint logic cannot see.
    """

    pointing: ConstraintRecord
    input: ConstraintRecord
    zerocross: ConstraintRecord | None
    intersample_pointing: float

    @property
    def clean(self) -> bool:
        checks = [self.pointing, self.input]
        if self.zerocross is not None:
            checks.append(self.zerocross)
        return all(c.violations == 0 for c in checks)


def _record(margins: np.ndarray, t: np.ndarray) -> ConstraintRecord:
    bad = margins < 0.0
    first = float(t[np.argmax(bad)]) if bad.any() else None
    return ConstraintRecord(
        worst_margin=float(np.min(margins)),
        first_violation_t=first,
        violations=int(np.sum(bad)),
    )


def check_trace(trace: SimTrace, cs: ConstraintSet) -> ConstraintReport:
    """Evaluate pointing, input, and zero-crossing margins over a trace."""
    states = trace.states
    t = trace.t
    pointing = cs.pointing - np.max(np.abs(states[:, 0:3]), axis=1)
    inp = cs.input - np.max(np.abs(trace.inputs), axis=1)

    zrec = None
    if cs.zero_signs is not None:
        signs = np.asarray(cs.zero_signs, dtype=float)
        z = np.min(states[:, 6:10] * signs - cs.zero_margin, axis=1)
        zrec = _record(z, t)

    return ConstraintReport(
        pointing=_record(pointing, t),
        input=_record(inp, t[: trace.n_steps]),
        zerocross=zrec,
        intersample_pointing=float(np.min(trace.substep_pointing)),
    )


def _fmt(x: float) -> str:
    return format(x, ".17g")


def export_csv(trace: SimTrace, path) -> None:
    """Write the trace in the documented CSV schema."""
    cs = trace.config.constraints if trace.config else ConstraintSet()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_COLUMNS)
        if trace.states.shape[0] == 0:
            return
        n = trace.n_steps
        for k in range(n + 1):
            x = trace.states[k]
            final = k == n
            u = [math.nan] * N_INPUTS if final else list(trace.inputs[k])
            v = trace.v[min(k, n - 1)] if n > 0 else (math.nan, math.nan)
            margins = cs.state_margins(x)
            m_in = math.nan if final else cs.input - float(np.max(np.abs(trace.inputs[k])))
            row = (
                [_fmt(trace.t[k])]
                + [_fmt(val) for val in x]
                + [_fmt(val) for val in u]
                + [_fmt(v[0]), _fmt(v[1])]
                + ["end" if final else trace.branch[k]]
                + ["" if final else str(int(trace.admissible[k]))]
                + [
                    _fmt(margins["pointing"]),
                    _fmt(m_in),
                    _fmt(margins.get("zerocross", math.nan)),
                    _fmt(math.nan if final else trace.ctrl_time[k]),
                ]
            )
            writer.writerow(row)


def import_csv(path) -> dict[str, np.ndarray | list[str]]:
    """Read a trace CSV back into column arrays (schema-checked)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_CSV_COLUMNS:
            raise ValueError(f"unexpected trace columns: {header}")
        rows = list(reader)
    cols: dict[str, np.ndarray | list[str]] = {}
    for i, name in enumerate(TRACE_CSV_COLUMNS):
        if name == "branch":
            cols[name] = [row[i] for row in rows]
        elif name == "admissible":
            cols[name] = np.array(
                [float(row[i]) if row[i] else math.nan for row in rows]
            )
        else:
            cols[name] = np.array([float(row[i]) for row in rows])
    return cols


# -- scenario (de)serialization ------------------------------------------------

def scenario_to_dict(sc: ScenarioConfig) -> dict:
    """Plain-dict mirror of a ScenarioConfig (JSON-ready).

    Geometry angles are stored in degrees; states and speeds stay in
    radians and rad/s.
    """
    p = sc.params
    out = {
        "params": {
            "J1": p.J1,
            "J2": p.J2,
            "J3": p.J3,
            "Js": p.Js,
            "n": p.n,
            "alpha_deg": math.degrees(p.alpha),
            "beta_deg": math.degrees(p.beta),
            "tau_max": p.tau_max,
        },
        "x0": list(sc.x0),
        "r": list(sc.r),
        "controller": sc.controller,
        "mpc": {
            "horizon": sc.mpc.horizon,
            "ts": sc.mpc.ts,
            "q_diag": list(sc.mpc.q_diag),
            "r_diag": list(sc.mpc.r_diag),
            "iters": sc.mpc.iters,
            "u_max": sc.mpc.u_max,
            "warm_start": sc.mpc.warm_start,
            "warm_tail": sc.mpc.warm_tail,
        },
        "rg": {
            "n_rg": sc.rg.n_rg,
            "stride": sc.rg.stride,
            "increment_factor": sc.rg.increment_factor,
            "c_f": sc.rg.c_f,
            "c_f_tight": sc.rg.c_f_tight,
            "oscillation_rejection": sc.rg.oscillation_rejection,
            "nonlinear_prediction": sc.rg.nonlinear_prediction,
            "prediction_slack": sc.rg.prediction_slack,
            "calibrate_terminal": sc.rg.calibrate_terminal,
            "calibration_seed": sc.rg.calibration_seed,
        },
        "constraints": {
            "pointing": sc.constraints.pointing,
            "input": sc.constraints.input,
            "zero_signs": list(sc.constraints.zero_signs)
            if sc.constraints.zero_signs
            else None,
            "zero_margin": sc.constraints.zero_margin,
        },
        "duration_orbits": sc.duration_orbits,
        "seed": sc.seed,
        "l_random": list(sc.l_random) if sc.l_random else None,
        "substeps": sc.substeps,
        "v0": list(sc.v0) if sc.v0 else None,
    }
    return out


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a plain dict (inverse of scenario_to_dict)."""
    try:
        pd = dict(data.get("params", {}))
        params = SpacecraftParams(
            J1=pd.get("J1", 1000.0),
            J2=pd.get("J2", 2200.0),
            J3=pd.get("J3", 1400.0),
            Js=pd.get("Js", 0.1),
            n=pd.get("n", 1.1086e-3),
            alpha=math.radians(pd.get("alpha_deg", 45.0)),
            beta=math.radians(pd.get("beta_deg", 0.0)),
            tau_max=pd.get("tau_max", 0.05),
        )
        md = dict(data.get("mpc", {}))
        mpc = MpcConfig(
            horizon=md.get("horizon", 5),
            ts=md.get("ts", 10.0),
            q_diag=tuple(md.get("q_diag", (1.0,) * 6 + (1e-4,) * 4)),
            r_diag=tuple(md.get("r_diag", (1e-8,) * 4)),
            iters=md.get("iters", 6),
            u_max=md.get("u_max", params.u_max),
            warm_start=md.get("warm_start", True),
            warm_tail=md.get("warm_tail", "lqr"),
        )
        rd = dict(data.get("rg", {}))
        rg = RgConfig(
            n_rg=rd.get("n_rg", 3000),
            stride=rd.get("stride", 50),
            increment_factor=rd.get("increment_factor", 0.3),
            c_f=rd.get("c_f", 1e10),
            c_f_tight=rd.get("c_f_tight", 1e5),
            oscillation_rejection=rd.get("oscillation_rejection", False),
            nonlinear_prediction=rd.get("nonlinear_prediction", False),
            prediction_slack=rd.get("prediction_slack", 1e-3),
            calibrate_terminal=rd.get("calibrate_terminal", True),
            calibration_seed=rd.get("calibration_seed", 0),
        )
        cd = dict(data.get("constraints", {}))
        zero_signs = cd.get("zero_signs")
        constraints = ConstraintSet(
            pointing=cd.get("pointing", 0.1),
            input=cd.get("input", mpc.u_max),
            zero_signs=tuple(zero_signs) if zero_signs else None,
            zero_margin=cd.get("zero_margin", 0.3),
        )
        l_random = data.get("l_random")
        v0 = data.get("v0")
        return ScenarioConfig(
            params=params,
            x0=tuple(data["x0"]),
            r=tuple(data["r"]),
            controller=data.get("controller", "rgtdmpc"),
            mpc=mpc,
            rg=rg,
            constraints=constraints,
            duration_orbits=data.get("duration_orbits", 10.0),
            seed=data.get("seed", 0),
            l_random=tuple(l_random) if l_random else None,
            substeps=data.get("substeps", 10),
            v0=tuple(v0) if v0 else None,
        )
    except KeyError as exc:
        raise ValueError(f"scenario file is missing required key: {exc}") from exc


def load_scenario(path, overrides: dict | None = None) -> ScenarioConfig:
    """Load a scenario JSON file, applying dotted-key overrides last."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if overrides:
        for key, value in overrides.items():
            _set_dotted(data, key, value)
    return scenario_from_dict(data)


def _set_dotted(data: dict, key: str, value) -> None:
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


# -- trace metrics -------------------------------------------------------------

def completion_time(
    trace: SimTrace, wheel_target: np.ndarray, tol: float = 0.5
) -> float | None:
    """Earliest time after which all wheels stay within tol of the target.

    Returns None when the run never settles into the tolerance band.
    """
    dev = np.max(np.abs(trace.states[:, 6:10] - np.asarray(wheel_target)), axis=1)
    inside = dev <= tol
    if not inside[-1]:
        return None
    # Last index where the band is violated; settled right after.
    bad = np.nonzero(~inside)[0]
    if bad.size == 0:
        return float(trace.t[0])
    return float(trace.t[bad[-1] + 1])


def settling_time(trace: SimTrace, tol: float = 0.5) -> float:
    """Earliest time after which wheels stay within tol of their final values."""
    final = trace.states[-1, 6:10]
    t = completion_time(trace, final, tol)
    return float(trace.t[0]) if t is None else t


def total_variation(inputs: np.ndarray) -> float:
    """Sum of absolute step-to-step input changes, summed over channels."""
    return float(np.sum(np.abs(np.diff(inputs, axis=0))))
