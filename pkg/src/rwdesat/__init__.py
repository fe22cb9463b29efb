"""Gravity-gradient reaction wheel desaturation toolkit.

Simulates a four-reaction-wheel spacecraft under gravity-gradient torques,
analyzes controllability of the linearized dynamics across wheel-array
geometries, and performs constrained desaturation maneuvers with a
reference-governor-augmented time-distributed MPC.
"""

from rwdesat.dynamics import (
    SpacecraftParams,
    KinematicsSingularityError,
    equilibrium,
    eom_rhs,
    rk4_step,
    rw_momentum,
    wheel_axes,
)
from rwdesat.linmodel import (
    ContinuousLinearModel,
    DiscreteLinearModel,
    linearize_analytic,
    linearize_numeric,
    linearize,
    discretize_zoh,
)
from rwdesat.numerics import (
    RiccatiConvergenceError,
    SpectralRadiusError,
    solve_dare,
    solve_dlyap,
    lqr_gain,
    closed_loop_matrix,
    matrix_rank,
)
from rwdesat.analysis import (
    DocResult,
    SweepSpec,
    ctrb_matrix,
    doc_index,
    doc_index_restricted,
    doc_sweep,
    gramian,
    rank_scan,
)
from rwdesat.tdmpc import MpcConfig, TdmpcController, ExtendedSequence
from rwdesat.governor import (
    ConstraintSet,
    RgConfig,
    RgTdmpcController,
    InitialReferenceError,
)
from rwdesat.sim import (
    ScenarioConfig,
    SimTrace,
    run_closed_loop,
    check_trace,
    export_csv,
    load_scenario,
)

__version__ = "0.1.0"
