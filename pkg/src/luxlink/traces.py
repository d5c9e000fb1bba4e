"""Step-indexed optimizer traces and their CSV form.

The CSV schema is fixed:  step,best_objective,phi_w,phi_d,feasible,elapsed_ms
(floats in shortest round-trip form, feasible as true/false).  Runs in
deterministic mode write elapsed_ms as 0 so repeated executions produce
byte-identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

CSV_COLUMNS = ["step", "best_objective", "phi_w", "phi_d", "feasible", "elapsed_ms"]


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return repr(float(x))


@dataclass
class TraceStep:
    step: int
    best_objective: float
    phi_w: float
    phi_d: float
    feasible: bool
    elapsed_ms: int
    layout: Optional[np.ndarray] = None   # best-so-far solution vector snapshot


@dataclass
class OptimizerTrace:
    method: str
    seed: int
    budget: int
    steps: list[TraceStep] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, step: TraceStep) -> None:
        if len(self.steps) >= self.budget:
            raise RuntimeError(f"trace budget {self.budget} exceeded")
        self.steps.append(step)

    @property
    def final(self) -> TraceStep:
        if not self.steps:
            raise ValueError("empty trace")
        return self.steps[-1]

    def best_objectives(self) -> np.ndarray:
        return np.array([s.best_objective for s in self.steps])

    def steps_to_stall(self) -> int:
        """Index of the last step that improved the best objective."""
        best = self.best_objectives()
        if best.size == 0:
            return 0
        improved = np.flatnonzero(np.diff(best) > 0)
        return int(self.steps[improved[-1] + 1].step) if improved.size else int(self.steps[0].step)


def write_trace_csv(trace: OptimizerTrace, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in trace.steps:
            writer.writerow([s.step, _fmt(s.best_objective), _fmt(s.phi_w),
                             _fmt(s.phi_d), "true" if s.feasible else "false",
                             s.elapsed_ms])


def read_trace_csv(path: str | Path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"unexpected trace columns {reader.fieldnames}")
        rows = list(reader)
    return {
        "step": np.array([int(r["step"]) for r in rows]),
        "best_objective": np.array([float(r["best_objective"]) for r in rows]),
        "phi_w": np.array([float(r["phi_w"]) for r in rows]),
        "phi_d": np.array([float(r["phi_d"]) for r in rows]),
        "feasible": np.array([r["feasible"] == "true" for r in rows]),
        "elapsed_ms": np.array([int(r["elapsed_ms"]) for r in rows]),
    }
