"""Shared CSV loading and deterministic figure output for the plot scripts.

The scripts consume the toolkit's documented CSV schemas and never
recompute physics. Figures are reproducible byte for byte: fixed style,
Agg backend, no timestamps.
"""

from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

SWEEP_COLUMNS = (
    ["alpha_deg", "beta_deg", "deltaT_s", "J_ind", "log10_J_ind"]
    + [f"x_ind_{i}" for i in range(1, 11)]
    + ["rank"]
)

SUMMARY_COLUMNS = [
    "curve", "deltaT_s", "beta_deg", "inertia_value",
    "alpha_min_deg", "J_ind_min", "log10_J_ind_min",
]

TRACE_COLUMNS = (
    ["t_s", "phi", "theta", "psi", "w1", "w2", "w3", "Om1", "Om2", "Om3", "Om4"]
    + ["u1", "u2", "u3", "u4", "v1", "v2", "branch", "admissible"]
    + ["margin_pointing", "margin_input", "margin_zerocross", "t_ctrl_s"]
)


class SchemaError(ValueError):
    """The input CSV does not match the documented schema."""


def load_csv(path, expected_columns) -> dict[str, list[str]]:
    """Read a CSV, check its header, and return named string columns.

    Raises:
        SchemaError: naming the first offending column on mismatch, or
            when the file holds no data rows.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        rows = list(reader)

    if header != list(expected_columns):
        for i, want in enumerate(expected_columns):
            got = header[i] if i < len(header) else "<missing>"
            if got != want:
                raise SchemaError(
                    f"{path}: column {i + 1} is {got!r}, expected {want!r}"
                )
        raise SchemaError(f"{path}: {len(header)} columns, "
                          f"expected {len(expected_columns)}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return {
        name: [row[i] for row in rows] for i, name in enumerate(expected_columns)
    }


def floats(column: list[str]) -> list[float]:
    return [float(v) if v != "" else math.nan for v in column]


def new_figure(width=7.0, height=4.5):
    """Figure with the house style; deterministic across runs."""
    plt.rcParams.update({
        "figure.dpi": 110,
        "savefig.dpi": 110,
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "svg.hashsalt": "rwdesat",
    })
    return plt.subplots(figsize=(width, height))


def save(fig, path) -> None:
    """Write the figure without any timestamp metadata."""
    path = str(path)
    metadata = {"Date": None} if path.endswith(".svg") else None
    fig.savefig(path, metadata=metadata)
    plt.close(fig)
