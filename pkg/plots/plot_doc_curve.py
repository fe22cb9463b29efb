"""Effort-index curves: log10(J_ind) versus elevation angle, per horizon.

Consumes the sweep CSV written by `rwdesat doc-sweep` and draws one curve
per (deltaT, beta) combination. The singular elevations were never
computed, so the curves keep a visible gap there.

Usage: plot-doc-curve --in doc_sweep.csv --out doc_curves.png
"""

from __future__ import annotations

import argparse
import math
import sys

from figlib import SWEEP_COLUMNS, SchemaError, floats, load_csv, new_figure, save


def render(in_path, out_path) -> None:
    cols = load_csv(in_path, SWEEP_COLUMNS)
    alpha = floats(cols["alpha_deg"])
    beta = floats(cols["beta_deg"])
    delta_t = floats(cols["deltaT_s"])
    log_j = floats(cols["log10_J_ind"])

    curves: dict[tuple[float, float], list[tuple[float, float]]] = {}
    for a, b, dt, lj in zip(alpha, beta, delta_t, log_j):
        curves.setdefault((dt, b), []).append((a, lj))

    fig, ax = new_figure()
    for (dt, b), pts in sorted(curves.items()):
        pts.sort()
        spacings = sorted(
            pts[i + 1][0] - pts[i][0] for i in range(len(pts) - 1)
        )
        step = spacings[len(spacings) // 2] if spacings else 1.0
        xs, ys = [], []
        prev = None
        for a, lj in pts:
            if prev is not None and a - prev > 1.5 * step:
                xs.append(math.nan)  # break the line across grid gaps
                ys.append(math.nan)
            xs.append(a)
            ys.append(lj)
            prev = a
        label = f"dT = {dt / 3600:g} hr"
        if len({k[1] for k in curves}) > 1:
            label += f", beta = {b:g} deg"
        ax.plot(xs, ys, label=label, linewidth=1.2)

    ax.set_xlabel("elevation angle alpha [deg]")
    ax.set_ylabel("log10 of the effort index")
    ax.set_title("Worst-case desaturation effort vs wheel-array elevation")
    ax.legend(loc="upper center", ncol=2)
    save(fig, out_path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="in_path", required=True)
    parser.add_argument("--out", dest="out_path", required=True)
    args = parser.parse_args(argv)
    try:
        render(args.in_path, args.out_path)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
