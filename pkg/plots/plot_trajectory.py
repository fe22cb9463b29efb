"""Closed-loop trajectory figure with constraint bands.

Consumes a trace CSV written by `rwdesat simulate` (optionally a second
trace for a dashed-line comparison, e.g. governed vs plain controller)
and draws attitude angles, wheel speeds, and wheel accelerations against
time, overlaying the +/-0.1 rad pointing band and the +/-0.5 rad/s^2
input band.

Usage: plot-trajectory --in trace_rg.csv [--compare trace_plain.csv]
                       --out trajectory.png
"""

from __future__ import annotations

import argparse
import sys

from figlib import TRACE_COLUMNS, SchemaError, floats, load_csv, plt, save

POINTING_BAND = 0.1
INPUT_BAND = 0.5


def _series(path):
    cols = load_csv(path, TRACE_COLUMNS)
    t = [v / 3600.0 for v in floats(cols["t_s"])]
    return cols, t


def render(in_path, out_path, compare_path=None) -> None:
    cols, t = _series(in_path)
    cmp_cols = cmp_t = None
    if compare_path is not None:
        cmp_cols, cmp_t = _series(compare_path)

    plt.rcParams.update({"figure.dpi": 110, "savefig.dpi": 110, "font.size": 9})
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 8.0), sharex=True)

    ax = axes[0]
    for name, label in (("phi", "roll"), ("theta", "pitch"), ("psi", "yaw")):
        line, = ax.plot(t, floats(cols[name]), linewidth=1.1, label=label)
        if cmp_cols is not None:
            ax.plot(cmp_t, floats(cmp_cols[name]), linewidth=0.9,
                    linestyle="--", color=line.get_color())
    ax.axhline(POINTING_BAND, color="k", linewidth=0.8, linestyle=":")
    ax.axhline(-POINTING_BAND, color="k", linewidth=0.8, linestyle=":")
    ax.set_ylabel("attitude [rad]")
    ax.legend(loc="upper right", ncol=3)
    ax.grid(alpha=0.3)

    ax = axes[1]
    for i in range(1, 5):
        line, = ax.plot(t, floats(cols[f"Om{i}"]), linewidth=1.1,
                        label=f"wheel {i}")
        if cmp_cols is not None:
            ax.plot(cmp_t, floats(cmp_cols[f"Om{i}"]), linewidth=0.9,
                    linestyle="--", color=line.get_color())
    ax.set_ylabel("wheel speed [rad/s]")
    ax.legend(loc="upper right", ncol=4)
    ax.grid(alpha=0.3)

    ax = axes[2]
    n = len(t) - 1  # last row carries no input
    for i in range(1, 5):
        line, = ax.plot(t[:n], floats(cols[f"u{i}"])[:n], linewidth=1.0,
                        label=f"u{i}")
        if cmp_cols is not None:
            m = len(cmp_t) - 1
            ax.plot(cmp_t[:m], floats(cmp_cols[f"u{i}"])[:m], linewidth=0.8,
                    linestyle="--", color=line.get_color())
    ax.axhline(INPUT_BAND, color="k", linewidth=0.8, linestyle=":")
    ax.axhline(-INPUT_BAND, color="k", linewidth=0.8, linestyle=":")
    ax.set_ylabel("wheel accel [rad/s$^2$]")
    ax.set_xlabel("time [hr]")
    ax.legend(loc="upper right", ncol=4)
    ax.grid(alpha=0.3)

    title = "Desaturation maneuver"
    if compare_path is not None:
        title += " (solid: primary, dashed: comparison)"
    fig.suptitle(title)
    fig.tight_layout()
    save(fig, out_path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="in_path", required=True)
    parser.add_argument("--compare", dest="compare_path", default=None)
    parser.add_argument("--out", dest="out_path", required=True)
    args = parser.parse_args(argv)
    try:
        render(args.in_path, args.out_path, args.compare_path)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
