"""Figure rendering from curriseq CSV files.

Each recognized CSV kind maps to one deterministic image: identical inputs
produce identical bytes (fixed style, fixed dpi, pinned PNG metadata, no
randomness).  Rendering never modifies its inputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_METADATA = {"Software": "curriseq-plots"}
_DPI = 120


class SchemaError(ValueError):
    """CSV missing or malformed for the requested figure."""


@dataclass
class PlotSpec:
    input_path: Path
    kind: str  # curve | bars | heatmap
    output_path: Path
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    columns: dict = field(default_factory=dict)  # role -> csv column name


def _read_csv(path) -> tuple[list[str], list[dict]]:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames
            rows = list(reader)
    except OSError as e:
        raise SchemaError(f"{path}: {e}") from e
    if not header:
        raise SchemaError(f"{path}: empty CSV, nothing to plot")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return header, rows


def _require(header, path, *columns):
    for column in columns:
        if column not in header:
            raise SchemaError(f"{path}: missing column {column!r}")


def _floats(rows, column, path):
    try:
        return np.array([float(r[column]) for r in rows])
    except (TypeError, ValueError) as e:
        raise SchemaError(f"{path}: column {column!r} is not numeric") from e


def _new_axes(spec):
    fig, ax = plt.subplots(figsize=(7.0, 4.2), dpi=_DPI)
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    if spec.title:
        ax.set_title(spec.title)
    return fig, ax


def _save(fig, spec):
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=_PNG_METADATA)
    plt.close(fig)
    return out


def _render_curve(spec):
    header, rows = _read_csv(spec.input_path)
    x_col = spec.columns.get("x", "step")
    y_col = spec.columns.get("y", "value")
    group_col = spec.columns.get("group")
    _require(header, spec.input_path, x_col, y_col)
    fig, ax = _new_axes(spec)
    if group_col:
        _require(header, spec.input_path, group_col)
        groups = sorted({r[group_col] for r in rows})
        for name in groups:
            sub = [r for r in rows if r[group_col] == name]
            ax.plot(_floats(sub, x_col, spec.input_path),
                    _floats(sub, y_col, spec.input_path), marker=".", label=name)
        ax.legend()
    else:
        ax.plot(_floats(rows, x_col, spec.input_path),
                _floats(rows, y_col, spec.input_path), marker=".")
    ax.grid(True, alpha=0.3)
    return _save(fig, spec)


def _render_bars(spec):
    header, rows = _read_csv(spec.input_path)
    x_col = spec.columns.get("x", "partition")
    y_col = spec.columns.get("y", "error_rate")
    group_col = spec.columns.get("group")
    _require(header, spec.input_path, x_col, y_col)
    fig, ax = _new_axes(spec)
    if group_col and group_col in header:
        groups = sorted({r[group_col] for r in rows})
        width = 0.8 / len(groups)
        for k, name in enumerate(groups):
            sub = [r for r in rows if r[group_col] == name]
            x = _floats(sub, x_col, spec.input_path)
            ax.bar(x + (k - (len(groups) - 1) / 2) * width,
                   _floats(sub, y_col, spec.input_path), width=width, label=name)
        ax.legend()
    else:
        ax.bar(_floats(rows, x_col, spec.input_path),
               _floats(rows, y_col, spec.input_path), width=0.7)
    ax.set_ylim(bottom=0.0)
    return _save(fig, spec)


def _render_heatmap(spec):
    header, rows = _read_csv(spec.input_path)
    row_col = spec.columns.get("row", "i")
    col_col = spec.columns.get("col", "t")
    val_col = spec.columns.get("value", "weight")
    _require(header, spec.input_path, row_col, col_col, val_col)
    row_ids = sorted({int(r[row_col]) for r in rows})
    col_ids = sorted({int(r[col_col]) for r in rows})
    grid = np.full((len(row_ids), len(col_ids)), np.nan)
    row_index = {v: k for k, v in enumerate(row_ids)}
    col_index = {v: k for k, v in enumerate(col_ids)}
    for r in rows:
        try:
            grid[row_index[int(r[row_col])], col_index[int(r[col_col])]] = float(r[val_col])
        except (TypeError, ValueError) as e:
            raise SchemaError(f"{spec.input_path}: bad heatmap cell {r}") from e
    fig, ax = _new_axes(spec)
    image = ax.imshow(grid, aspect="auto", cmap="Blues", vmin=0.0, vmax=1.0,
                      origin="lower",
                      extent=(col_ids[0] - 0.5, col_ids[-1] + 0.5,
                              row_ids[0] - 0.5, row_ids[-1] + 0.5))
    fig.colorbar(image, ax=ax, label=val_col)
    return _save(fig, spec)


_RENDERERS = {"curve": _render_curve, "bars": _render_bars, "heatmap": _render_heatmap}


def render(spec: PlotSpec) -> Path:
    """Render one figure; raises SchemaError before writing anything if the
    CSV does not match the expected schema."""
    if spec.kind not in _RENDERERS:
        raise SchemaError(f"unknown figure kind {spec.kind!r}")
    return _RENDERERS[spec.kind](spec)


# filename -> builder for the four recognized run-directory CSVs
def _known_specs(run_dir: Path, out_dir: Path) -> list[PlotSpec]:
    specs = []
    if (run_dir / "train_log.csv").exists():
        specs.append(PlotSpec(
            run_dir / "train_log.csv", "curve", out_dir / "learning_curve.png",
            x_label="updates", y_label="dev metric", title="Learning curve",
            columns={"x": "step", "y": "dev_metric"},
        ))
    if (run_dir / "diversity.csv").exists():
        specs.append(PlotSpec(
            run_dir / "diversity.csv", "curve", out_dir / "diversity.png",
            x_label="updates", y_label="unique trigrams", title="Sample diversity",
            columns={"x": "step", "y": "unique_trigrams", "group": "method"},
        ))
    if (run_dir / "errors_positional.csv").exists():
        specs.append(PlotSpec(
            run_dir / "errors_positional.csv", "bars", out_dir / "positional_errors.png",
            x_label="relative position (partition)", y_label="error rate",
            title="Positional error rate",
            columns={"x": "partition", "y": "error_rate", "group": "filter"},
        ))
    if (run_dir / "schedule.csv").exists():
        specs.append(PlotSpec(
            run_dir / "schedule.csv", "heatmap", out_dir / "schedule_heatmap.png",
            x_label="token position t", y_label="update i", title="Loss-weight schedule",
            columns={"row": "i", "col": "t", "value": "weight"},
        ))
    return specs


def render_all(run_dir, out_dir) -> list[Path]:
    """Render every recognized CSV in a run directory; writes an index.json
    mapping inputs to images."""
    run_dir, out_dir = Path(run_dir), Path(out_dir)
    specs = _known_specs(run_dir, out_dir)
    if not specs:
        raise SchemaError(f"{run_dir}: no recognized CSV files")
    written = [render(spec) for spec in specs]
    index = {str(spec.input_path.name): str(path.name) for spec, path in zip(specs, written)}
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "index.json", "w", encoding="utf-8") as f:
        json.dump(index, f, indent=2, sort_keys=True)
        f.write("\n")
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="curriseq-plots",
        description="Render figures from curriseq run-directory CSV files.",
    )
    parser.add_argument("run_dir", help="directory holding the CSV outputs")
    parser.add_argument("out_dir", help="directory to write images into")
    parser.add_argument("--only", choices=("curve", "bars", "heatmap"), default=None,
                        help="render just one figure kind")
    args = parser.parse_args(argv)
    try:
        if args.only:
            specs = [
                s for s in _known_specs(Path(args.run_dir), Path(args.out_dir))
                if s.kind == args.only
            ]
            if not specs:
                raise SchemaError(f"{args.run_dir}: no recognized CSV of that kind")
            written = [render(spec) for spec in specs]
        else:
            written = render_all(args.run_dir, args.out_dir)
        for path in written:
            print(path)
    except (SchemaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
