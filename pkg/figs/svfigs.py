"""Render error-vs-index figures from svextract CSV files.

One script, no service: reads the harness CSV schema verbatim, draws errors
as markers and bounds as lines on a log-scale y axis, and writes PNG or SVG.
Colors follow a fixed convention so figures are comparable across runs:
red for generalized Nystrom, green for Rayleigh-Ritz and forward bounds,
blue for Weyl and HMT, black for SVD and backward bounds, magenta for the
improved and approximated-backward bounds.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

EXPECTED_COLUMNS = (
    "trial", "method", "i", "sigma_exact", "sigma_hat", "abs_error",
    "weyl", "forward", "backward", "backward_approx", "improved",
    "tau", "applicable",
)

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4", "fig5")

METHOD_COLORS = {"GN": "red", "RR": "green", "HMT": "blue", "SVD": "black"}
BOUND_COLORS = {
    "weyl": "blue",
    "forward": "green",
    "backward": "black",
    "backward_approx": "magenta",
    "improved": "magenta",
}

# (kind, method, column) per figure; kind "error" draws markers from
# abs_error, kind "bound" draws a line from the named bound column.
SERIES = {
    "fig1": [("error", "GN", None), ("error", "RR", None), ("error", "SVD", None)],
    "fig2": [("error", "GN", None), ("bound", "GN", "weyl"), ("bound", "GN", "forward")],
    "fig3": [
        ("error", "GN", None), ("bound", "GN", "weyl"),
        ("bound", "GN", "forward"), ("bound", "GN", "improved"),
    ],
    "fig4": [
        ("error", "GN", None), ("bound", "GN", "forward"),
        ("error", "RR", None), ("bound", "RR", "forward"),
        ("error", "HMT", None), ("bound", "HMT", "forward"),
        ("error", "SVD", None), ("bound", "SVD", "forward"),
    ],
    "fig5": [
        ("error", "GN", None), ("bound", "GN", "weyl"), ("bound", "GN", "forward"),
        ("bound", "GN", "backward"), ("bound", "GN", "backward_approx"),
    ],
}


class SchemaError(Exception):
    """The CSV does not match the expected harness schema."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    figure_id: str
    output_path: str
    log_floor: float = 1e-18


@dataclass(frozen=True)
class RenderResult:
    series: tuple
    clipped: int
    output_path: str


def load_rows(csv_path: str) -> list[dict]:
    """Read and schema-check a harness CSV; returns the data rows as dicts."""
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames
        if columns is None:
            raise SchemaError(f"{csv_path}: empty file, expected the harness header")
        for col in EXPECTED_COLUMNS:
            if col not in columns:
                raise SchemaError(f"{csv_path}: missing column {col!r}")
        for col in columns:
            if col not in EXPECTED_COLUMNS:
                raise SchemaError(f"{csv_path}: unexpected column {col!r}")
        return list(reader)


def _series_points(rows, method, column, log_floor):
    """The (x, y) points of one series, clipped at the floor; counts clips."""
    xs, ys, clipped = [], [], 0
    for row in rows:
        if row["method"] != method:
            continue
        raw = row[column]
        if raw == "":
            continue
        value = float(raw)
        if not math.isfinite(value):
            continue
        if value < log_floor:
            value = log_floor
            clipped += 1
        xs.append(int(row["i"]))
        ys.append(value)
    return xs, ys, clipped


def _label(kind, method, column):
    if kind == "error":
        return f"{method} error"
    names = {
        "weyl": "Weyl",
        "forward": "forward bound",
        "backward": "backward bound",
        "backward_approx": "approx backward bound",
        "improved": "improved bound",
    }
    prefix = f"{method} " if column == "forward" and method != "GN" else ""
    return prefix + names[column]


def render(spec: FigureSpec) -> RenderResult:
    """Draw one figure from a harness CSV and write it to spec.output_path."""
    if spec.figure_id not in FIGURE_IDS:
        raise ValueError(f"unknown figure id {spec.figure_id!r}")
    if spec.log_floor <= 0:
        raise ValueError("log_floor must be positive")
    rows = load_rows(spec.csv_path)
    if rows:
        first_trial = min(row["trial"] for row in rows)
        rows = [row for row in rows if row["trial"] == first_trial]

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    drawn = []
    clipped = 0
    for kind, method, column in SERIES[spec.figure_id]:
        col = "abs_error" if kind == "error" else column
        xs, ys, nclip = _series_points(rows, method, col, spec.log_floor)
        clipped += nclip
        if not xs:
            continue
        label = _label(kind, method, column)
        color = METHOD_COLORS[method] if kind == "error" else BOUND_COLORS[column]
        if kind == "error":
            ax.semilogy(xs, ys, linestyle="none", marker="o", markersize=3,
                        color=color, label=label)
        else:
            ax.semilogy(xs, ys, linestyle="-", color=color, label=label)
        drawn.append(label)

    ax.set_yscale("log")
    ax.set_xlabel("singular value index")
    ax.set_ylabel("error / bound")
    ax.set_title(spec.figure_id)
    if drawn:
        ax.legend(loc="best", fontsize=8)
    if clipped:
        ax.annotate(f"{clipped} values below {spec.log_floor:g} clipped",
                    xy=(0.02, 0.02), xycoords="axes fraction", fontsize=7)
    # suppress embedded dates so re-rendering is byte-identical
    metadata = {"Date": None} if str(spec.output_path).endswith(".svg") else None
    fig.savefig(spec.output_path, dpi=150, metadata=metadata)
    plt.close(fig)
    return RenderResult(series=tuple(drawn), clipped=clipped, output_path=spec.output_path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="svfigs", description="Render an error-vs-index figure from a svextract CSV."
    )
    parser.add_argument("--csv", required=True, help="input CSV (harness schema)")
    parser.add_argument("--figure", required=True, choices=FIGURE_IDS)
    parser.add_argument("--out", required=True, help="output image path (.png or .svg)")
    parser.add_argument("--log-floor", type=float, default=1e-18,
                        help="values below this are clipped (default 1e-18)")
    args = parser.parse_args(argv)
    spec = FigureSpec(csv_path=args.csv, figure_id=args.figure,
                      output_path=args.out, log_floor=args.log_floor)
    try:
        result = render(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.output_path} ({len(result.series)} series"
          + (f", {result.clipped} clipped values" if result.clipped else "") + ")")
    return 0


if __name__ == "__main__":
    sys.exit(main())
