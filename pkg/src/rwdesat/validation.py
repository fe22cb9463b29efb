"""Self-check suites wiring the independent oracles together.

Each suite returns its worst residual and a pass verdict; the CLI's
validate subcommand runs them all. The linearization suite accepts an
injectable analytic-Jacobian function so a deliberately corrupted
closed form is detectable end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from rwdesat.analysis import ctrb_matrix, gramian, gramian_quadrature
from rwdesat.dynamics import (
    SpacecraftParams,
    eom_rhs,
    equilibrium,
    rw_momentum,
    wheel_axes,
)
from rwdesat.linmodel import (
    ANALYTIC_ABS_TOL,
    ANALYTIC_REL_TOL,
    discretize_zoh,
    linearize_analytic,
    linearize_numeric,
)
from rwdesat.numerics import (
    closed_loop_matrix,
    expm,
    lqr_gain,
    matrix_rank,
    solve_dare,
    spectral_radius,
)

__all__ = ["SuiteResult", "run_suites"]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    worst: float
    bound: float
    detail: str = ""


def _equilibrium_suite() -> SuiteResult:
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        p = SpacecraftParams(
            alpha=rng.uniform(-math.pi / 2, math.pi / 2),
            beta=rng.uniform(0.0, math.pi / 2 * 0.999),
        )
        v = rng.uniform(-90, 90, 2)
        worst = max(worst, float(np.max(np.abs(
            eom_rhs(equilibrium(v, p), np.zeros(4), p)
        ))))
    return SuiteResult("equilibrium_residual", worst < 1e-12, worst, 1e-12)


def _jacobian_suite(
    analytic_fn: Callable = linearize_analytic,
) -> SuiteResult:
    worst = -np.inf
    for a in (-75.0, -45.0, -15.0, 15.0, 45.0, 75.0):
        for b in (0.0, 15.0, 30.0):
            p = SpacecraftParams(alpha=math.radians(a), beta=math.radians(b))
            for r in ((0.0, 0.0), (-1.0, 1.0), (50.0, -50.0)):
                an = analytic_fn(p, np.asarray(r, float))
                nu = linearize_numeric(p, np.asarray(r, float))
                for ma, mn in ((an.A, nu.A), (an.B, nu.B)):
                    tol = np.maximum(ANALYTIC_REL_TOL * np.abs(ma), ANALYTIC_ABS_TOL)
                    worst = max(worst, float(np.max(np.abs(ma - mn) - tol)))
    return SuiteResult(
        "jacobian_agreement", worst <= 0.0, worst, 0.0,
        "worst entrywise excess over tolerance",
    )


def _gramian_suite() -> SuiteResult:
    worst = 0.0
    for a_deg, hours in ((45.0, 1.0), (70.0, 2.0)):
        p = SpacecraftParams(alpha=math.radians(a_deg))
        m = linearize_analytic(p, np.zeros(2))
        g1 = gramian(m.A, m.B, hours * 3600.0)
        g2 = gramian_quadrature(m.A, m.B, hours * 3600.0, panels=10_000)
        worst = max(worst, float(np.linalg.norm(g1 - g2) / np.linalg.norm(g1)))
    return SuiteResult("gramian_cross_check", worst < 1e-8, worst, 1e-8)


def _zoh_suite() -> SuiteResult:
    p = SpacecraftParams()
    m = linearize_analytic(p, np.zeros(2))
    d = discretize_zoh(m, 10.0)
    lam = np.sort_complex(np.linalg.eigvals(d.Ad))
    want = np.sort_complex(np.exp(10.0 * np.linalg.eigvals(m.A)))
    worst = float(np.max(np.abs(lam - want)))
    d4, d6 = discretize_zoh(m, 4.0), discretize_zoh(m, 6.0)
    worst = max(worst, float(np.max(np.abs(d.Ad - d6.Ad @ d4.Ad))))
    return SuiteResult("zoh_discretization", worst < 1e-8, worst, 1e-8)


def _dare_suite() -> SuiteResult:
    p = SpacecraftParams()
    dlm = discretize_zoh(linearize_analytic(p, np.array([-1.0, 1.0])), 10.0)
    q = np.diag([1.0] * 6 + [1e-4] * 4)
    r = 1e-8 * np.eye(4)
    sol = solve_dare(dlm.Ad, dlm.Bd, q, r)
    pb = sol @ dlm.Bd
    gain = np.linalg.solve(r + dlm.Bd.T @ pb, pb.T @ dlm.Ad)
    residual = float(np.max(np.abs(
        sol - (q + dlm.Ad.T @ sol @ dlm.Ad - (dlm.Ad.T @ pb) @ gain)
    ))) / float(np.max(np.abs(sol)))
    k = lqr_gain(dlm.Ad, dlm.Bd, sol, r)
    rho = spectral_radius(closed_loop_matrix(dlm.Ad, dlm.Bd, k))
    ok = residual < 1e-9 and rho < 1.0
    return SuiteResult("riccati_synthesis", ok, max(residual, rho - 1.0), 1e-9,
                       f"rho(closed loop) = {rho:.6f}")


def _expm_suite() -> SuiteResult:
    rng = np.random.default_rng(55)
    worst = 0.0
    for _ in range(5):
        m = rng.standard_normal((10, 10))
        m *= 2.0 / spectral_radius(m)
        t1, t2 = rng.uniform(0.2, 1.0, 2)
        err = np.max(np.abs(expm(m * (t1 + t2)) - expm(m * t1) @ expm(m * t2)))
        worst = max(worst, float(err))
    return SuiteResult("expm_semigroup", worst < 1e-9, worst, 1e-9)


def _momentum_suite() -> SuiteResult:
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(50):
        p = SpacecraftParams(
            alpha=rng.uniform(-math.pi / 2, math.pi / 2),
            beta=rng.uniform(0.0, math.pi / 2 * 0.999),
        )
        x = np.zeros(10)
        x[6:10] = rng.uniform(-90, 90, 4)
        h1 = rw_momentum(x, p)
        h2 = p.Js * wheel_axes(p).T @ x[6:10]
        worst = max(worst, float(np.max(np.abs(h1 - h2))))
    return SuiteResult("wheel_momentum_cross_check", worst < 1e-12, worst, 1e-12)


def _rank_suite() -> SuiteResult:
    r = np.array([3.7, -12.2])
    expected = {0.0: 8, 90.0: 6, -90.0: 6, 45.0: 10}
    bad = []
    for a_deg, want in expected.items():
        p = SpacecraftParams(alpha=math.radians(a_deg), beta=math.radians(10.0))
        m = linearize_analytic(p, r)
        got = matrix_rank(ctrb_matrix(m.A, m.B))
        if got != want:
            bad.append(f"alpha={a_deg}: {got} != {want}")
    return SuiteResult(
        "controllability_rank_pattern", not bad, float(len(bad)), 0.0,
        "; ".join(bad),
    )


def run_suites(
    analytic_fn: Callable = linearize_analytic,
) -> list[SuiteResult]:
    """Run every validation suite; `analytic_fn` is a testing hook."""
    return [
        _equilibrium_suite(),
        _jacobian_suite(analytic_fn),
        _momentum_suite(),
        _gramian_suite(),
        _zoh_suite(),
        _expm_suite(),
        _dare_suite(),
        _rank_suite(),
    ]
