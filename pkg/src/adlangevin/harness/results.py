"""Sweep results, their CSV form and the JSON manifest written beside it."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_HEADER = ("method", "stepsize", "metric", "value", "runs", "diverged", "unstable")
UNSTABLE_VALUES = ("true", "false", "budget")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class Cell:
    """One (method, stepsize, metric) entry. ``value`` is None when unstable."""

    method: str
    stepsize: float
    metric: str
    value: float | None
    runs: int
    diverged: int
    unstable: str = "false"
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.unstable not in UNSTABLE_VALUES:
            raise ValueError(f"unstable must be one of {UNSTABLE_VALUES}, got {self.unstable!r}")
        if not 0 <= self.diverged <= self.runs:
            raise ValueError(f"diverged={self.diverged} outside [0, runs={self.runs}]")


@dataclass
class SweepResult:
    experiment: str
    cells: list[Cell] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def __eq__(self, other):
        return isinstance(other, SweepResult) and self.cells == other.cells

    def series(self, method: str, metric: str | None = None) -> list[tuple[float, float | None]]:
        """``(h, value)`` pairs for one method; value None for unstable or budget cells."""
        rows = [c for c in self.cells if c.method == method and (metric is None or c.metric == metric)]
        return [(c.stepsize, c.value) for c in rows]

    def cell(self, method: str, stepsize: float, metric: str) -> Cell:
        for c in self.cells:
            if c.method == method and c.metric == metric and math.isclose(c.stepsize, stepsize, rel_tol=1e-12):
                return c
        raise KeyError((method, stepsize, metric))

    @property
    def methods(self) -> list[str]:
        return list(dict.fromkeys(c.method for c in self.cells))

    @property
    def metrics(self) -> list[str]:
        return list(dict.fromkeys(c.metric for c in self.cells))

    def stable_stepsizes(self, method: str) -> list[float]:
        return sorted({c.stepsize for c in self.cells if c.method == method and c.unstable == "false"})

    def unstable_threshold(self, method: str) -> float | None:
        """Smallest stepsize whose cell is unstable (all runs diverged), or None."""
        hs = [c.stepsize for c in self.cells if c.method == method and c.unstable == "true"]
        return min(hs) if hs else None


def csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in result.cells:
        value = "" if c.value is None else _fmt(c.value)
        w.writerow([c.method, _fmt(c.stepsize), c.metric, value, c.runs, c.diverged, c.unstable])
    return buf.getvalue()


def write_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    path.write_text(csv_text(result))
    return path


def read_csv(path) -> SweepResult:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        cells = []
        for row in reader:
            if not row:
                continue
            method, h, metric, value, runs, diverged, unstable = row
            cells.append(
                Cell(method, float(h), metric, float(value) if value else None, int(runs), int(diverged), unstable)
            )
    return SweepResult(experiment="", cells=cells)


def manifest_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".manifest.json")


def write_manifest(result: SweepResult, csv_path, config) -> Path:
    from .. import __version__

    data = {
        "experiment": result.experiment,
        "config_sha256": config.digest(),
        "seed": config.seed,
        "software_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "config": config.to_dict(),
        "wall_time_seconds": [
            {"method": c.method, "stepsize": c.stepsize, "metric": c.metric, "seconds": c.wall_time}
            for c in result.cells
        ],
        "extras": result.extras,
    }
    path = manifest_path(csv_path)
    path.write_text(json.dumps(data, indent=2, default=float) + "\n")
    return path
