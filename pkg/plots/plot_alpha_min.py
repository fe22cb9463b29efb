"""Optimal elevation and minimum effort versus a swept moment of inertia.

Consumes the summary CSV written by `rwdesat doc-sweep` for an inertia
sweep and draws alpha_min (left axis) and log10 of the effort minimum
(right panel) against the swept inertia value.

Usage: plot-alpha-min --in doc_summary.csv --out alpha_min.png
"""

from __future__ import annotations

import argparse
import sys

from figlib import SUMMARY_COLUMNS, SchemaError, floats, load_csv, plt, save


def render(in_path, out_path) -> None:
    cols = load_csv(in_path, SUMMARY_COLUMNS)
    inertia = floats(cols["inertia_value"])
    alpha_min = floats(cols["alpha_min_deg"])
    log_j_min = floats(cols["log10_J_ind_min"])
    if all(v != v for v in inertia):  # all NaN: not an inertia sweep
        raise SchemaError(f"{in_path}: summary has no inertia_value entries")

    rows = sorted(zip(inertia, alpha_min, log_j_min))
    xs = [r[0] for r in rows]

    plt.rcParams.update({"figure.dpi": 110, "savefig.dpi": 110, "font.size": 9})
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.6))
    ax1.plot(xs, [r[1] for r in rows], marker=".", linewidth=1.0)
    ax1.set_xlabel("swept moment of inertia [kg m^2]")
    ax1.set_ylabel("alpha_min [deg]")
    ax1.grid(alpha=0.3)
    ax2.plot(xs, [r[2] for r in rows], marker=".", color="tab:red", linewidth=1.0)
    ax2.set_xlabel("swept moment of inertia [kg m^2]")
    ax2.set_ylabel("log10 of the effort minimum")
    ax2.grid(alpha=0.3)
    fig.suptitle("Optimal elevation and minimum effort vs inertia")
    fig.tight_layout()
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
