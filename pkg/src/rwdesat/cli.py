"""Command-line entry point.

Subcommands:
    simulate   run a closed-loop scenario, write trace CSV + report
    doc-sweep  effort-index sweeps over geometry/horizon/inertia grids
    rank-scan  controllability rank over the (alpha, beta) grid
    synth      controller synthesis report for one geometry
    validate   run the cross-check suites

Common flags: --config PATH, --out DIR, --jobs N, --seed N,
--set KEY=VALUE (repeatable, dotted keys, JSON-literal values).
Exit codes: 0 success, 1 error, 2 constraint violation detected.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from rwdesat.analysis import (
    SweepSpec,
    doc_sweep,
    rank_scan,
    write_summary_csv,
    write_sweep_csv,
)
from rwdesat.dynamics import SpacecraftParams
from rwdesat.governor import (
    ConstraintSet,
    InitialReferenceError,
    find_admissible_level,
)
from rwdesat.linmodel import discretize_zoh, linearize
from rwdesat.numerics import (
    RiccatiConvergenceError,
    closed_loop_matrix,
    lqr_gain,
    matrix_rank,
    solve_dare,
    solve_dlyap,
    spectral_radius,
)
from rwdesat.analysis import ctrb_matrix
from rwdesat.sim import check_trace, export_csv, load_scenario, run_closed_loop
from rwdesat.tdmpc import MpcConfig, condense
from rwdesat.validation import run_suites

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2


def _parse_set(values: list[str]) -> dict:
    overrides = {}
    for item in values or []:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def _load_json(path: str, overrides: dict) -> dict:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    for key, value in overrides.items():
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return data


def _params_from_dict(d: dict) -> SpacecraftParams:
    return SpacecraftParams(
        J1=d.get("J1", 1000.0),
        J2=d.get("J2", 2200.0),
        J3=d.get("J3", 1400.0),
        Js=d.get("Js", 0.1),
        n=d.get("n", 1.1086e-3),
        alpha=math.radians(d.get("alpha_deg", 45.0)),
        beta=math.radians(d.get("beta_deg", 0.0)),
        tau_max=d.get("tau_max", 0.05),
    )


def _grid(d, default_start, default_stop, default_step) -> np.ndarray:
    """Accept either an explicit list or a {start, stop, step} range."""
    if d is None:
        d = {}
    if isinstance(d, list):
        return np.asarray(d, dtype=float)
    start = d.get("start", default_start)
    stop = d.get("stop", default_stop)
    step = d.get("step", default_step)
    return np.arange(start, stop + 0.5 * step, step)


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        overrides = _parse_set(args.set)
        if args.seed is not None:
            overrides.setdefault("seed", args.seed)
        sc = load_scenario(args.config, overrides)
        trace = run_closed_loop(sc)
    except FileNotFoundError as exc:
        print(f"error: scenario file not found: {exc.filename}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, InitialReferenceError, RiccatiConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    trace_path = out / "trace.csv"
    export_csv(trace, trace_path)
    report = check_trace(trace, sc.constraints)

    summary = {
        "steps": trace.n_steps,
        "pointing": {
            "worst_margin": report.pointing.worst_margin,
            "violations": report.pointing.violations,
            "first_violation_t": report.pointing.first_violation_t,
        },
        "input": {
            "worst_margin": report.input.worst_margin,
            "violations": report.input.violations,
        },
        "zerocross": None
        if report.zerocross is None
        else {
            "worst_margin": report.zerocross.worst_margin,
            "violations": report.zerocross.violations,
            "first_violation_t": report.zerocross.first_violation_t,
        },
        "intersample_pointing_margin": report.intersample_pointing,
        "mean_ctrl_time_s": float(np.mean(trace.ctrl_time)),
        "max_ctrl_time_s": float(np.max(trace.ctrl_time)),
        "clean": report.clean,
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2))

    lines = [f"trace: {trace_path} ({trace.n_steps} steps)"]
    for name, rec in (("pointing", report.pointing), ("input", report.input),
                      ("zerocross", report.zerocross)):
        if rec is None:
            continue
        lines.append(
            f"{name}: worst margin {rec.worst_margin:.6g}, "
            f"{rec.violations} violations"
        )
    print("\n".join(lines))
    return EXIT_OK if report.clean else EXIT_VIOLATION


def _sweep_spec_from_config(data: dict) -> SweepSpec:
    base = _params_from_dict(data.get("params", {}))
    alphas = _grid(data.get("alphas_deg"), -89.0, 89.0, 1.0)
    alphas = alphas[~np.isin(alphas, (-90.0, 0.0, 90.0))]
    return SweepSpec(
        alphas_deg=tuple(float(a) for a in alphas),
        betas_deg=tuple(float(b) for b in _grid(data.get("betas_deg"), 0.0, 0.0, 1.0)),
        delta_t_hours=tuple(data.get("delta_t_hours", [1.0])),
        r=tuple(data.get("r", (0.0, 0.0))),
        base=base,
        inertia_param=data.get("inertia_param"),
        inertia_values=tuple(data.get("inertia_values", ())),
    )


def _run_sweep_chunk(payload):
    spec_dict, alphas = payload
    spec = SweepSpec(**{**spec_dict, "alphas_deg": tuple(alphas)})
    return doc_sweep(spec).rows


def cmd_doc_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        data = _load_json(args.config, _parse_set(args.set))
        spec = _sweep_spec_from_config(data)
    except FileNotFoundError as exc:
        print(f"error: config not found: {exc.filename}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and len(spec.alphas_deg) >= 2 * jobs:
        spec_dict = dict(
            alphas_deg=spec.alphas_deg,
            betas_deg=spec.betas_deg,
            delta_t_hours=spec.delta_t_hours,
            r=spec.r,
            base=spec.base,
            inertia_param=spec.inertia_param,
            inertia_values=spec.inertia_values,
        )
        chunks = np.array_split(np.asarray(spec.alphas_deg), jobs)
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(
                pool.map(
                    _run_sweep_chunk,
                    [(spec_dict, chunk.tolist()) for chunk in chunks if chunk.size],
                )
            )
        rows = [row for part in parts for row in part]
        # Re-derive the per-curve summaries from the merged rows.
        from rwdesat.analysis import _summarize_curve

        summaries = []
        by_curve: dict = {}
        for row in rows:
            by_curve.setdefault(row.curve, []).append(row)
        for curve, curve_rows in by_curve.items():
            first = curve_rows[0]
            j_val = None
            if spec.inertia_param:
                j_val = float(curve.split(",")[0].split("=")[1])
            summaries.append(
                _summarize_curve(curve_rows, curve, first.delta_t_s,
                                 first.beta_deg, j_val)
            )
        result_rows, result_summaries = rows, summaries
    else:
        res = doc_sweep(spec)
        result_rows, result_summaries = res.rows, res.summaries

    write_sweep_csv(result_rows, out / "doc_sweep.csv")
    write_summary_csv(result_summaries, out / "doc_summary.csv")
    print(f"wrote {out / 'doc_sweep.csv'} ({len(result_rows)} rows)")
    for s in result_summaries:
        log10_min = (
            math.log10(s.effort_min) if 0 < s.effort_min < math.inf else math.inf
        )
        print(f"  {s.curve}: alpha_min = {s.alpha_min_deg:.0f} deg, "
              f"log10(J_ind_min) = {log10_min:.3f}")
    return EXIT_OK


def cmd_rank_scan(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        data = _load_json(args.config, _parse_set(args.set)) if args.config else {}
        base = _params_from_dict(data.get("params", {}))
        alphas = _grid(data.get("alphas_deg"), -90.0, 90.0, 1.0)
        betas = _grid(data.get("betas_deg"), 0.0, 89.0, 1.0)
        draws = data.get("draws", 5)
        rtol = data.get("rtol", 1e-9)
    except FileNotFoundError as exc:
        print(f"error: config not found: {exc.filename}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if alphas.size == 0 or betas.size == 0:
        print("error: empty grid", file=sys.stderr)
        return EXIT_ERROR

    seed = args.seed if args.seed is not None else 0
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and alphas.size >= 2 * jobs:
        chunks = np.array_split(alphas, jobs)
        payloads = [
            (base, chunk.tolist(), betas.tolist(), draws, seed, rtol)
            for chunk in chunks
            if chunk.size
        ]
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_rank_chunk, payloads))
        ranks = np.vstack(parts)
    else:
        ranks = rank_scan(base, alphas, betas, draws=draws, seed=seed, rtol=rtol).ranks

    path = out / "rank_scan.csv"
    with open(path, "w") as fh:
        fh.write("alpha_deg,beta_deg,rank\n")
        for i, a in enumerate(alphas):
            for j, b in enumerate(betas):
                fh.write(f"{a:.17g},{b:.17g},{ranks[i, j]}\n")
    full = int(np.sum(ranks == 10))
    print(f"wrote {path}: {full}/{ranks.size} grid points fully controllable")
    return EXIT_OK


def _rank_chunk(payload):
    base, alphas, betas, draws, seed, rtol = payload
    return rank_scan(
        base, np.asarray(alphas), np.asarray(betas), draws=draws, seed=seed,
        rtol=rtol,
    ).ranks


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        data = _load_json(args.config, _parse_set(args.set)) if args.config else {}
        p = _params_from_dict(data.get("params", {}))
        r = np.asarray(data.get("r", (-1.0, 1.0)), dtype=float)
        mpc = MpcConfig(
            ts=data.get("ts", 10.0),
            q_diag=tuple(data.get("q_diag", (1.0,) * 6 + (1e-4,) * 4)),
            r_diag=tuple(data.get("r_diag", (1e-8,) * 4)),
        )
        c_f = data.get("c_f", 1e10)
    except FileNotFoundError as exc:
        print(f"error: config not found: {exc.filename}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    clm = linearize(p, r)
    rank = matrix_rank(ctrb_matrix(clm.A, clm.B))
    if rank < 10:
        print(
            f"error: linearization at alpha = {math.degrees(p.alpha):.1f} deg, "
            f"beta = {math.degrees(p.beta):.1f} deg is uncontrollable "
            f"(rank {rank} < 10); synthesis aborted",
            file=sys.stderr,
        )
        return EXIT_ERROR
    dlm = discretize_zoh(clm, mpc.ts)
    q = np.diag(mpc.q_diag)
    rw = np.diag(mpc.r_diag)
    try:
        sol = solve_dare(dlm.Ad, dlm.Bd, q, rw)
    except RiccatiConvergenceError as exc:
        print(
            f"error: Riccati synthesis failed at alpha = "
            f"{math.degrees(p.alpha):.1f} deg: {exc}",
            file=sys.stderr,
        )
        return EXIT_ERROR

    k = lqr_gain(dlm.Ad, dlm.Bd, sol, rw)
    acl = closed_loop_matrix(dlm.Ad, dlm.Bd, k)
    rho = spectral_radius(acl)
    p_f = solve_dlyap(acl, np.eye(10))
    qp = condense(dlm, mpc, sol)

    pb = sol @ dlm.Bd
    gain = np.linalg.solve(rw + dlm.Bd.T @ pb, pb.T @ dlm.Ad)
    residual = float(
        np.max(np.abs(sol - (q + dlm.Ad.T @ sol @ dlm.Ad - (dlm.Ad.T @ pb) @ gain)))
    ) / float(np.max(np.abs(sol)))

    cs = ConstraintSet(input=p.u_max)
    seed = args.seed if args.seed is not None else 0
    level, cal = find_admissible_level(dlm, k, p_f, c_f, cs, p.u_max, seed=seed)

    spectrum = np.linalg.eigvals(acl)
    report = {
        "rank": rank,
        "dare_residual_rel": residual,
        "closed_loop_spectral_radius": rho,
        "closed_loop_spectrum": sorted(
            [[float(z.real), float(z.imag)] for z in spectrum],
            key=lambda z: -(z[0] ** 2 + z[1] ** 2),
        ),
        "lambda_max_H": qp.L,
        "lqr_gain": k.tolist(),
        "terminal_weight": sol.tolist(),
        "lyapunov_weight": p_f.tolist(),
        "terminal_level_requested": c_f,
        "terminal_level_verified": level,
        "terminal_level_ok_as_requested": bool(cal.ok and level == c_f),
        "calibration": {
            "worst_wheel_dev": cal.worst_wheel_dev,
            "pointing_violations": cal.pointing_violations,
            "input_violations": cal.input_violations,
        },
    }
    (out / "synth.json").write_text(json.dumps(report, indent=2))
    print(f"controllability rank: {rank}")
    print(f"DARE residual (relative): {residual:.3e}")
    print(f"closed-loop spectral radius: {rho:.6f} (< 1)")
    print(f"lambda_max(H): {qp.L:.6g}")
    if report["terminal_level_ok_as_requested"]:
        print(f"terminal level {c_f:g}: verified")
    else:
        print(
            f"terminal level {c_f:g}: NOT invariant-admissible as requested; "
            f"largest verified level = {level:.6g} "
            f"(worst wheel deviation {cal.worst_wheel_dev:.2f} rad/s at request)"
        )
    return EXIT_OK


def cmd_validate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_suites()
    rows = []
    all_ok = True
    for res in results:
        all_ok &= res.passed
        status = "PASS" if res.passed else "FAIL"
        rows.append(
            f"{status}  {res.name:32s} worst {res.worst:.3e} "
            f"(bound {res.bound:.0e}) {res.detail}"
        )
    text = "\n".join(rows)
    print(text)
    (out / "validate.txt").write_text(text + "\n")
    (out / "validate.json").write_text(
        json.dumps(
            [
                {
                    "name": r.name,
                    "passed": r.passed,
                    "worst": r.worst,
                    "bound": r.bound,
                }
                for r in results
            ],
            indent=2,
        )
    )
    return EXIT_OK if all_ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwdesat",
        description="Reaction-wheel desaturation toolkit: simulation, "
        "controllability analysis, and constrained MPC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="JSON configuration file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--jobs", type=int, default=None,
                        help="worker processes for sweeps")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed override")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="dotted-key config override (repeatable)")

    common(sub.add_parser("simulate", help="run a closed-loop scenario"))
    common(sub.add_parser("doc-sweep", help="effort-index sweep"))
    common(sub.add_parser("rank-scan", help="controllability rank scan"),
           config_required=False)
    common(sub.add_parser("synth", help="controller synthesis report"),
           config_required=False)
    common(sub.add_parser("validate", help="run cross-check suites"),
           config_required=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "doc-sweep": cmd_doc_sweep,
        "rank-scan": cmd_rank_scan,
        "synth": cmd_synth,
        "validate": cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
