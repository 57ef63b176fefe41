"""Experiment report plumbing: aligned text tables and CSV emission."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


@dataclass
class ExperimentReport:
    """Named list of (metric, value) rows plus the parameters that produced
    them.  Deterministic given the experiment seed."""

    name: str
    parameters: dict[str, object] = field(default_factory=dict)
    rows: list[tuple[str, object]] = field(default_factory=list)

    def add(self, metric: str, value: object) -> None:
        self.rows.append((metric, value))

    def render(self) -> str:
        lines = [f"== {self.name} =="]
        if self.parameters:
            params = ", ".join(f"{k}={_fmt(v)}" for k, v in self.parameters.items())
            lines.append(f"   parameters: {params}")
        if self.rows:
            width = max(len(m) for m, _ in self.rows)
            for metric, value in self.rows:
                lines.append(f"   {metric.ljust(width)}  {_fmt(value)}")
        return "\n".join(lines)

    def write_csv(self, outdir: str | Path) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / f"{self.name}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for metric, value in self.rows:
                writer.writerow([metric, _fmt(value)])
        return path


def render_grid(
    title: str,
    col_headers: list[str],
    row_headers: list[str],
    cell: "callable",
) -> str:
    """Aligned grid; `cell(row, col)` supplies each entry as a string."""
    col_w = max(4, max(len(h) for h in col_headers) + 1)
    row_w = max(len(h) for h in row_headers) + 1
    lines = [title, " " * row_w + "".join(h.rjust(col_w) for h in col_headers)]
    for r in row_headers:
        lines.append(r.ljust(row_w) + "".join(cell(r, c).rjust(col_w) for c in col_headers))
    return "\n".join(lines)
