"""Controllability rank scans, finite-horizon gramians, and effort indices.

The degree-of-controllability (DoC) metric used throughout is the largest
eigenvalue of e^{A^T dT} M^{-1} e^{A dT}, where M is the finite-horizon
controllability gramian: the worst-case control energy, in a 2-norm
squared sense, needed to return a unit-norm initial state to the origin
in time dT. The associated eigenvector is the worst-case initial state.

Gramians of this plant are badly conditioned (condition numbers beyond
1e12 for multi-hour horizons), so the inverse is formed through a
diagonally equilibrated congruence: with T = diag(1/sqrt(M_ii)),

    Phi^T M^{-1} Phi = (T Phi)^T (T M T)^{-1} (T Phi)

is algebraically identical but numerically far better behaved. Both the
equilibrated and the raw evaluation are computed; results that disagree
by more than 10% are flagged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from rwdesat.dynamics import N_STATES, SpacecraftParams
from rwdesat.linmodel import linearize_analytic
from rwdesat.numerics import expm, matrix_rank, sym_eig_max

__all__ = [
    "SingularGramianError",
    "DocResult",
    "SweepSpec",
    "SweepRow",
    "SweepSummary",
    "DocSweepResult",
    "RankScanResult",
    "ctrb_matrix",
    "rank_scan",
    "gramian",
    "gramian_quadrature",
    "doc_index",
    "doc_index_restricted",
    "doc_sweep",
    "write_sweep_csv",
    "write_summary_csv",
    "SWEEP_CSV_COLUMNS",
]

# Singular RWA elevations where the linearization loses controllability.
SINGULAR_ALPHAS_DEG = (-90.0, 0.0, 90.0)

SWEEP_CSV_COLUMNS = (
    ["alpha_deg", "beta_deg", "deltaT_s", "J_ind", "log10_J_ind"]
    + [f"x_ind_{i}" for i in range(1, 11)]
    + ["rank"]
)


class SingularGramianError(np.linalg.LinAlgError):
    """The controllability gramian is numerically singular."""


def ctrb_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Controllability matrix [B, AB, ..., A^(n-1) B], shape (n, n*m)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


@dataclass(frozen=True)
class RankScanResult:
    """Consensus controllability ranks over an (alpha, beta) grid."""

    alphas_deg: np.ndarray
    betas_deg: np.ndarray
    ranks: np.ndarray  # shape (len(alphas), len(betas))
    draws: int


def _random_inertias(
    base: SpacecraftParams, rng: np.random.Generator
) -> tuple[float, float, float]:
    """Random inertias preserving the equality pattern of the base set.

    The scan emulates a generic-parameter rank computation: inertias are
    redrawn freely, except that deliberate degeneracies of the base
    parameters (equal moments) are kept, because those are exactly the
    structural cases under study.
    """
    for _ in range(1000):
        draw = rng.uniform(300.0, 2200.0, size=3)
        if math.isclose(base.J1, base.J2):
            draw[1] = draw[0]
        if math.isclose(base.J1, base.J3):
            draw[2] = draw[0]
        if math.isclose(base.J2, base.J3):
            draw[2] = draw[1]
        j1, j2, j3 = draw
        if j1 <= j2 + j3 and j2 <= j1 + j3 and j3 <= j1 + j2:
            # Keep distinct moments distinct so no accidental degeneracy.
            pattern_ok = True
            for a, b, equal in (
                (j1, j2, math.isclose(base.J1, base.J2)),
                (j1, j3, math.isclose(base.J1, base.J3)),
                (j2, j3, math.isclose(base.J2, base.J3)),
            ):
                if not equal and abs(a - b) < 1.0:
                    pattern_ok = False
            if pattern_ok:
                return float(j1), float(j2), float(j3)
    raise RuntimeError("could not draw a valid inertia triple")


def rank_scan(
    base: SpacecraftParams,
    alphas_deg: np.ndarray,
    betas_deg: np.ndarray,
    draws: int = 5,
    seed: int = 0,
    rtol: float = 1e-9,
) -> RankScanResult:
    """Numeric controllability rank over an (alpha, beta) grid.

    Each grid point is evaluated for `draws` random (r, inertia) draws
    and the consensus rank is the maximum over draws: a point counts as
    rank-deficient only if every draw is. Single-draw numeric rank is
    fragile; the consensus emulates a generic-parameter computation.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    alphas_deg = np.asarray(alphas_deg, dtype=float)
    betas_deg = np.asarray(betas_deg, dtype=float)
    rng = np.random.default_rng(seed)

    draw_sets = []
    for _ in range(draws):
        j1, j2, j3 = _random_inertias(base, rng)
        r = rng.uniform(-90.0, 90.0, size=2)
        draw_sets.append((j1, j2, j3, r))

    ranks = np.zeros((alphas_deg.size, betas_deg.size), dtype=int)
    for ia, a_deg in enumerate(alphas_deg):
        for ib, b_deg in enumerate(betas_deg):
            best = 0
            for j1, j2, j3, r in draw_sets:
                p = SpacecraftParams(
                    J1=j1,
                    J2=j2,
                    J3=j3,
                    Js=base.Js,
                    n=base.n,
                    alpha=math.radians(a_deg),
                    beta=math.radians(b_deg),
                    tau_max=base.tau_max,
                )
                m = linearize_analytic(p, r)
                best = max(best, matrix_rank(ctrb_matrix(m.A, m.B), rtol=rtol))
                if best == N_STATES:
                    break
            ranks[ia, ib] = best
    return RankScanResult(
        alphas_deg=alphas_deg, betas_deg=betas_deg, ranks=ranks, draws=draws
    )


def gramian(a: np.ndarray, b: np.ndarray, delta_t: float) -> np.ndarray:
    """Finite-horizon controllability gramian int_0^dT e^{At} BB^T e^{A^T t} dt.

    Computed with the augmented-block exponential identity: for
    C = [[-A, BB^T], [0, A^T]], the (1,2) block G of e^{C dT} satisfies
    M = e^{A^T dT}^T G.
    """
    if delta_t <= 0.0:
        raise ValueError(f"horizon must be positive, got {delta_t}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -a
    block[:n, n:] = b @ b.T
    block[n:, n:] = a.T
    phi = expm(block * delta_t)
    m = phi[n:, n:].T @ phi[:n, n:]
    return 0.5 * (m + m.T)


def gramian_quadrature(
    a: np.ndarray, b: np.ndarray, delta_t: float, panels: int = 10_000
) -> np.ndarray:
    """Composite-Simpson evaluation of the gramian integral.

    Independent cross-check for the augmented exponential route. The
    state transition over one panel is computed once and chained, so the
    cost is one small expm plus `panels` matrix products.
    """
    if panels % 2 != 0:
        panels += 1
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = delta_t / panels
    step = expm(a * h)

    phi = np.eye(a.shape[0])
    bbt = b @ b.T
    total = bbt.copy()  # weight 1 at t = 0
    for k in range(1, panels):
        phi = step @ phi
        w = 4.0 if k % 2 == 1 else 2.0
        integrand = phi @ bbt @ phi.T
        total += w * integrand
    phi = step @ phi
    total += phi @ bbt @ phi.T  # weight 1 at t = dT
    m = (h / 3.0) * total
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class DocResult:
    """Worst-case control effort at one geometry and horizon.

    Attributes:
        effort: largest eigenvalue of Phi^T M^{-1} Phi (dimensionless,
            2-norm-squared sense).
        worst_ic: associated unit-norm initial state, original coordinates.
        alpha, beta: RWA geometry [rad].
        delta_t: horizon [s].
        effort_raw: same quantity evaluated without equilibration.
        ill_conditioned: True when the two evaluations differ by > 10%.
    """

    effort: float
    worst_ic: np.ndarray
    alpha: float
    beta: float
    delta_t: float
    effort_raw: float
    ill_conditioned: bool


def _effort_eig(
    m: np.ndarray, phi: np.ndarray, scale: np.ndarray | None
) -> tuple[float, np.ndarray]:
    """lambda_max and eigenvector of Phi^T M^{-1} Phi via a symmetric solve."""
    if scale is None:
        m_s, phi_s = m, phi
    else:
        t = 1.0 / scale
        m_s = m * np.outer(t, t)
        phi_s = phi * t[:, None]
    try:
        factor = scipy.linalg.cho_factor(m_s)
    except np.linalg.LinAlgError as exc:
        raise SingularGramianError(str(exc)) from exc
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - alias
        raise SingularGramianError(str(exc)) from exc
    w = phi_s.T @ scipy.linalg.cho_solve(factor, phi_s)
    return sym_eig_max(w)


def doc_index(
    a: np.ndarray,
    b: np.ndarray,
    delta_t: float,
    alpha: float = float("nan"),
    beta: float = float("nan"),
) -> DocResult:
    """Degree-of-controllability index over horizon delta_t.

    Raises:
        SingularGramianError: at uncontrollable geometries where the
            gramian has no Cholesky factor.
    """
    m = gramian(a, b, delta_t)
    phi = expm(np.asarray(a, dtype=float) * delta_t)

    diag = np.diag(m)
    if np.any(diag <= 0.0):
        raise SingularGramianError("gramian has a non-positive diagonal entry")
    scale = np.sqrt(diag)

    effort, vec = _effort_eig(m, phi, scale)
    try:
        effort_raw, _ = _effort_eig(m, phi, None)
    except SingularGramianError:
        effort_raw = float("inf")
    disagree = not (abs(effort_raw - effort) <= 0.1 * abs(effort))
    return DocResult(
        effort=effort,
        worst_ic=vec,
        alpha=alpha,
        beta=beta,
        delta_t=delta_t,
        effort_raw=effort_raw,
        ill_conditioned=disagree,
    )


def doc_index_restricted(
    a: np.ndarray,
    b: np.ndarray,
    delta_t: float,
    coords: tuple[int, ...],
    alpha: float = float("nan"),
    beta: float = float("nan"),
) -> DocResult:
    """Effort index maximized over unit states supported on `coords` only.

    `coords` holds 1-based state indices (7..10 selects the wheel speeds).
    This is the principal-submatrix eigenproblem of the full quadratic
    form; the returned worst initial state is embedded in R^10.
    """
    idx = np.asarray(sorted(coords), dtype=int) - 1
    if idx.size == 0 or idx.min() < 0 or idx.max() >= N_STATES:
        raise ValueError(f"coords must be a subset of 1..{N_STATES}, got {coords}")

    m = gramian(a, b, delta_t)
    phi = expm(np.asarray(a, dtype=float) * delta_t)
    diag = np.diag(m)
    if np.any(diag <= 0.0):
        raise SingularGramianError("gramian has a non-positive diagonal entry")
    scale = np.sqrt(diag)

    t = 1.0 / scale
    m_s = m * np.outer(t, t)
    phi_s = phi * t[:, None]
    try:
        factor = scipy.linalg.cho_factor(m_s)
    except np.linalg.LinAlgError as exc:
        raise SingularGramianError(str(exc)) from exc
    w = phi_s.T @ scipy.linalg.cho_solve(factor, phi_s)

    sub = w[np.ix_(idx, idx)]
    effort, vec_sub = sym_eig_max(sub)
    vec = np.zeros(N_STATES)
    vec[idx] = vec_sub
    return DocResult(
        effort=effort,
        worst_ic=vec,
        alpha=alpha,
        beta=beta,
        delta_t=delta_t,
        effort_raw=effort,
        ill_conditioned=False,
    )


@dataclass(frozen=True)
class SweepSpec:
    """Grid specification for a DoC sweep.

    When `inertia_param` is set ("J1" or "J2"), one curve is produced per
    value in `inertia_values` with the named moment overridden; otherwise
    one curve per horizon in `delta_t_hours`.
    """

    alphas_deg: tuple[float, ...]
    betas_deg: tuple[float, ...] = (0.0,)
    delta_t_hours: tuple[float, ...] = (1.0,)
    r: tuple[float, float] = (0.0, 0.0)
    base: SpacecraftParams = field(default_factory=SpacecraftParams)
    inertia_param: str | None = None
    inertia_values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.alphas_deg) == 0 or len(self.betas_deg) == 0:
            raise ValueError("sweep grids must be non-empty")
        bad = [a for a in self.alphas_deg if a in SINGULAR_ALPHAS_DEG]
        if bad:
            raise ValueError(
                f"alpha grid contains singular values {bad}; the effort "
                "index is undefined there"
            )
        if self.inertia_param is not None:
            if self.inertia_param not in ("J1", "J2"):
                raise ValueError("inertia_param must be 'J1' or 'J2'")
            if len(self.inertia_values) == 0:
                raise ValueError("inertia sweep needs at least one value")


@dataclass(frozen=True)
class SweepRow:
    curve: str
    alpha_deg: float
    beta_deg: float
    delta_t_s: float
    effort: float
    worst_ic: np.ndarray
    rank: int


@dataclass(frozen=True)
class SweepSummary:
    """Location and value of the per-curve effort minimum (alpha > 0 grid)."""

    curve: str
    delta_t_s: float
    beta_deg: float
    inertia_value: float | None
    alpha_min_deg: float
    effort_min: float


@dataclass(frozen=True)
class DocSweepResult:
    rows: list[SweepRow]
    summaries: list[SweepSummary]


def _sweep_params(spec: SweepSpec, inertia_value: float | None) -> SpacecraftParams:
    if inertia_value is None:
        return spec.base
    kw = dict(
        J1=spec.base.J1,
        J2=spec.base.J2,
        J3=spec.base.J3,
        Js=spec.base.Js,
        n=spec.base.n,
        alpha=spec.base.alpha,
        beta=spec.base.beta,
        tau_max=spec.base.tau_max,
    )
    kw[spec.inertia_param] = inertia_value
    return SpacecraftParams(**kw)


def doc_sweep(spec: SweepSpec) -> DocSweepResult:
    """Evaluate the effort index over the grid and locate per-curve minima.

    Curves are (horizon) pairs, or (inertia value) when an inertia sweep
    is requested. The per-curve minimum is searched over alpha > 0 only;
    the index is symmetric in alpha.
    """
    rows: list[SweepRow] = []
    summaries: list[SweepSummary] = []

    inertia_values: tuple[float | None, ...]
    inertia_values = spec.inertia_values if spec.inertia_param else (None,)

    r = np.asarray(spec.r, dtype=float)
    for j_val in inertia_values:
        p_base = _sweep_params(spec, j_val)
        for dt_hr in spec.delta_t_hours:
            delta_t = dt_hr * 3600.0
            for beta_deg in spec.betas_deg:
                curve = _curve_label(j_val, dt_hr, beta_deg, spec)
                curve_rows: list[SweepRow] = []
                for alpha_deg in spec.alphas_deg:
                    p = SpacecraftParams(
                        J1=p_base.J1,
                        J2=p_base.J2,
                        J3=p_base.J3,
                        Js=p_base.Js,
                        n=p_base.n,
                        alpha=math.radians(alpha_deg),
                        beta=math.radians(beta_deg),
                        tau_max=p_base.tau_max,
                    )
                    m = linearize_analytic(p, r)
                    rank = matrix_rank(ctrb_matrix(m.A, m.B))
                    try:
                        res = doc_index(m.A, m.B, delta_t, p.alpha, p.beta)
                        effort = res.effort
                        worst = res.worst_ic
                    except SingularGramianError:
                        effort = float("inf")
                        worst = np.full(N_STATES, np.nan)
                    curve_rows.append(
                        SweepRow(
                            curve=curve,
                            alpha_deg=float(alpha_deg),
                            beta_deg=float(beta_deg),
                            delta_t_s=delta_t,
                            effort=effort,
                            worst_ic=worst,
                            rank=rank,
                        )
                    )
                rows.extend(curve_rows)
                summaries.append(
                    _summarize_curve(curve_rows, curve, delta_t, beta_deg, j_val)
                )
    return DocSweepResult(rows=rows, summaries=summaries)


def _curve_label(
    j_val: float | None, dt_hr: float, beta_deg: float, spec: SweepSpec
) -> str:
    parts = []
    if j_val is not None:
        parts.append(f"{spec.inertia_param}={j_val:g}")
    parts.append(f"dT={dt_hr:g}hr")
    if len(spec.betas_deg) > 1:
        parts.append(f"beta={beta_deg:g}deg")
    return ",".join(parts)


def _summarize_curve(
    curve_rows: list[SweepRow],
    curve: str,
    delta_t: float,
    beta_deg: float,
    j_val: float | None,
) -> SweepSummary:
    positive = [row for row in curve_rows if row.alpha_deg > 0.0]
    candidates = positive if positive else curve_rows
    best = min(candidates, key=lambda row: row.effort)
    return SweepSummary(
        curve=curve,
        delta_t_s=delta_t,
        beta_deg=beta_deg,
        inertia_value=j_val,
        alpha_min_deg=best.alpha_deg,
        effort_min=best.effort,
    )


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    """Write sweep rows in the documented column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in rows:
            log10_effort = (
                math.log10(row.effort) if 0.0 < row.effort < math.inf else math.inf
            )
            writer.writerow(
                [
                    format(row.alpha_deg, ".17g"),
                    format(row.beta_deg, ".17g"),
                    format(row.delta_t_s, ".17g"),
                    format(row.effort, ".17g"),
                    format(log10_effort, ".17g"),
                ]
                + [format(v, ".17g") for v in row.worst_ic]
                + [str(row.rank)]
            )


def write_summary_csv(summaries: list[SweepSummary], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["curve", "deltaT_s", "beta_deg", "inertia_value",
             "alpha_min_deg", "J_ind_min", "log10_J_ind_min"]
        )
        for s in summaries:
            log10_min = (
                math.log10(s.effort_min)
                if 0.0 < s.effort_min < math.inf
                else math.inf
            )
            writer.writerow(
                [
                    s.curve,
                    format(s.delta_t_s, ".17g"),
                    format(s.beta_deg, ".17g"),
                    "" if s.inertia_value is None else format(s.inertia_value, ".17g"),
                    format(s.alpha_min_deg, ".17g"),
                    format(s.effort_min, ".17g"),
                    format(log10_min, ".17g"),
                ]
            )
