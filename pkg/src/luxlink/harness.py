"""Experiment orchestration: runs, repeats, sweeps, persistence, aggregation.

Each (method, sweep value, seed) cell executes independently and writes a
self-contained run directory::

    <out>/runs/<method>[_<axis><value>]_s<seed>/
        trace.csv          step-indexed best-so-far record
        report.json        the run's best solution evaluated in full
        rate_map.csv       point_index,x,y,gamma_bps
        illum_map.csv      point_index,x,y,I_total,I_sky_dir,I_sky_ind,I_sun_dir,I_sun_ind
        heat_wireless.png / heat_daylight.png
        exchanges.jsonl    model exchanges (loop methods only)
        meta.json          RunRecord

Sweep runs execute in deterministic-timing mode, so repeated executions of
the same plan produce byte-identical CSV trees.  Failures are isolated: a
failing cell records its error in meta.json and leaves siblings alone.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import Scenario, ScenarioConfig, nearest_square
from .heuristics import HeuristicConfig, best_layout, ga_run, random_search, saga_run
from .llm_client import BuiltinPseudoLlm, ScriptedStubClient
from .llm_loops import lhs_run, lmwo_run
from .objective import BaselineCache, Evaluator, PerformanceReport
from .plots import save_convergence_png, save_heatmap_png
from .traces import OptimizerTrace, read_trace_csv, write_trace_csv

log = logging.getLogger(__name__)

METHODS = ("rc", "ga", "saga", "lmwo", "lhs")
SWEEP_AXES = {
    "eta": "eta",
    "windows": "n_windows",
    "ris_units": "u_units",
}
DEFAULT_SWEEPS = {
    "eta": [1, 3, 5, 7, 9, 11],
    "windows": [2, 3, 4],
    "ris_units": [500, 700, 900, 1100, 1300],
}


@dataclass(frozen=True)
class ExperimentPlan:
    scenario: ScenarioConfig
    methods: tuple[str, ...] = ("saga",)
    repeats: int = 10
    base_seed: int = 0
    sweep_axis: Optional[str] = None
    sweep_values: tuple = ()
    out_dir: str = "runs_out"
    workers: int = 1
    stub_script: Optional[str] = None      # None selects the builtin pseudo client
    rc_budget: int = 2000
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    lmwo_stall: int = 5
    lmwo_cap: int = 10
    lhs_chunk: int = 100
    lhs_updates: int = 10
    deterministic_timing: bool = True

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}")

    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.repeats)]

    def cells(self) -> list[dict]:
        values = list(self.sweep_values) if self.sweep_axis else [None]
        return [{"method": m, "sweep_value": v, "seed": s}
                for v in values for m in self.methods for s in self.seeds()]

    def hash(self) -> str:
        import hashlib
        blob = json.dumps({
            "scenario": self.scenario.to_dict(),
            "methods": list(self.methods), "repeats": self.repeats,
            "base_seed": self.base_seed, "sweep_axis": self.sweep_axis,
            "sweep_values": list(self.sweep_values),
            "heuristic": self.heuristic.to_dict(),
            "rc_budget": self.rc_budget, "lhs_chunk": self.lhs_chunk,
            "lhs_updates": self.lhs_updates,
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    plan_hash: str
    method: str
    seed: int
    sweep_value: Optional[float]
    run_dir: str
    trace_path: Optional[str] = None
    report_path: Optional[str] = None
    wall_clock_ms: int = 0
    final_objective: Optional[float] = None
    final_phi_w: Optional[float] = None
    final_phi_d: Optional[float] = None
    steps_to_stall: Optional[int] = None
    error: Optional[str] = None

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


def scenario_for_cell(plan: ExperimentPlan, sweep_value) -> Scenario:
    cfg = plan.scenario
    if plan.sweep_axis is not None and sweep_value is not None:
        key = SWEEP_AXES[plan.sweep_axis]
        value = sweep_value
        if key == "u_units":
            value = nearest_square(int(value))
        elif key == "n_windows":
            value = int(value)
        cfg = cfg.replace(**{key: value})
    return Scenario(cfg)


def _cell_name(method: str, axis: Optional[str], value, seed: int) -> str:
    if axis is None or value is None:
        return f"{method}_s{seed}"
    vtxt = f"{value:g}" if isinstance(value, float) else str(value)
    return f"{method}_{axis}{vtxt}_s{seed}"


def _make_client(plan: ExperimentPlan, scenario: Scenario):
    if plan.stub_script is not None:
        return ScriptedStubClient.from_file(plan.stub_script)
    return BuiltinPseudoLlm(scenario)


def run_cell(plan: ExperimentPlan, cell: dict) -> RunRecord:
    """Execute one (method, sweep value, seed) cell and persist its outputs."""
    method, seed = cell["method"], cell["seed"]
    sweep_value = cell["sweep_value"]
    run_dir = Path(plan.out_dir) / "runs" / _cell_name(
        method, plan.sweep_axis, sweep_value, seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    record = RunRecord(plan_hash=plan.hash(), method=method, seed=seed,
                       sweep_value=sweep_value, run_dir=str(run_dir))
    t0 = time.perf_counter()
    try:
        scenario = scenario_for_cell(plan, sweep_value)
        trace = _dispatch(plan, scenario, method, seed)
        record.trace_path = str(run_dir / "trace.csv")
        write_trace_csv(trace, record.trace_path)
        if "exchanges" in trace.metadata:
            with (run_dir / "exchanges.jsonl").open("w") as fh:
                for ex in trace.metadata["exchanges"]:
                    fh.write(json.dumps(ex, sort_keys=True) + "\n")
        if "best" in trace.metadata:
            report = _final_report(scenario, trace)
            record.report_path = str(run_dir / "report.json")
            export_report(report, scenario, run_dir)
            record.final_objective = report.phi_o_raw
            record.final_phi_w = report.phi_w
            record.final_phi_d = report.phi_d
        record.steps_to_stall = trace.steps_to_stall() if trace.steps else None
    except Exception as err:  # noqa: BLE001 - cell isolation is the contract
        record.error = f"{type(err).__name__}: {err}"
        log.error("cell %s failed:\n%s", record.run_dir, traceback.format_exc())
    record.wall_clock_ms = 0 if plan.deterministic_timing else int(
        (time.perf_counter() - t0) * 1000)
    (run_dir / "meta.json").write_text(
        json.dumps(record.to_json_dict(), indent=2, sort_keys=True) + "\n")
    return record


def _dispatch(plan: ExperimentPlan, scenario: Scenario, method: str,
              seed: int) -> OptimizerTrace:
    det = plan.deterministic_timing
    if method == "rc":
        return random_search(scenario, plan.rc_budget, seed,
                             deterministic_timing=det)
    if method == "ga":
        return ga_run(scenario, plan.heuristic, seed, deterministic_timing=det)
    if method == "saga":
        return saga_run(scenario, plan.heuristic, seed, deterministic_timing=det)
    if method == "lmwo":
        return lmwo_run(scenario, _make_client(plan, scenario),
                        stall_window=plan.lmwo_stall, max_steps=plan.lmwo_cap,
                        deterministic_timing=det)
    if method == "lhs":
        return lhs_run(scenario, _make_client(plan, scenario),
                       k_generations=plan.lhs_chunk, max_updates=plan.lhs_updates,
                       seed=seed, defaults=plan.heuristic,
                       deterministic_timing=det)
    raise ValueError(f"unknown method {method!r}")


def _final_report(scenario: Scenario, trace: OptimizerTrace) -> PerformanceReport:
    layout = best_layout(trace, scenario)
    return Evaluator(scenario).evaluate(layout)


def export_report(report: PerformanceReport, scenario: Scenario,
                  out_dir: str | Path) -> dict:
    """Write a report's maps as CSV, its heatmaps as PNG and the JSON summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = scenario.grid
    paths = {}
    if report.rate is not None:
        rate_path = out_dir / "rate_map.csv"
        with rate_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point_index", "x", "y", "gamma_bps"])
            for i in range(grid.m):
                w.writerow([i, repr(float(grid.xs[i])), repr(float(grid.ys[i])),
                            repr(float(report.rate.gamma[i]))])
        paths["rate_csv"] = str(rate_path)
        extent = (grid.room.x0, grid.room.x1, grid.room.y0, grid.room.y1)
        report.wireless_image = save_heatmap_png(
            report.rate.gamma, grid.n_rows, grid.n_cols,
            out_dir / "heat_wireless.png", title="sum rate (bit/s)",
            extent=extent, cbar_label="bit/s")
        paths["wireless_png"] = report.wireless_image
    if report.illum is not None:
        illum_path = out_dir / "illum_map.csv"
        with illum_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point_index", "x", "y", "I_total", "I_sky_dir",
                        "I_sky_ind", "I_sun_dir", "I_sun_ind"])
            im = report.illum
            for i in range(grid.m):
                w.writerow([i, repr(float(grid.xs[i])), repr(float(grid.ys[i])),
                            repr(float(im.total[i])), repr(float(im.sky_direct[i])),
                            repr(float(im.sky_indirect[i])),
                            repr(float(im.sun_direct[i])),
                            repr(float(im.sun_indirect[i]))])
        paths["illum_csv"] = str(illum_path)
        extent = (grid.room.x0, grid.room.x1, grid.room.y0, grid.room.y1)
        report.daylight_image = save_heatmap_png(
            report.illum.total, grid.n_rows, grid.n_cols,
            out_dir / "heat_daylight.png", title="illuminance (lux)",
            extent=extent, cbar_label="lux")
        paths["daylight_png"] = report.daylight_image
    doc = report.to_json_dict()
    doc["maps"] = paths
    (out_dir / "report.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def _run_cell_star(args) -> RunRecord:
    return run_cell(*args)


def run_plan(plan: ExperimentPlan) -> list[RunRecord]:
    """Execute every cell, in a bounded process pool when workers > 1."""
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "plan.json").write_text(json.dumps({
        "plan_hash": plan.hash(),
        "scenario": plan.scenario.to_dict(),
        "methods": list(plan.methods),
        "repeats": plan.repeats,
        "base_seed": plan.base_seed,
        "sweep_axis": plan.sweep_axis,
        "sweep_values": list(plan.sweep_values),
    }, indent=2, sort_keys=True) + "\n")
    cells = plan.cells()
    if plan.workers <= 1:
        records = [run_cell(plan, c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            records = list(pool.map(_run_cell_star, [(plan, c) for c in cells]))
    return records


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def aggregate(records: list[RunRecord], out_dir: str | Path) -> list[dict]:
    """Summarise final objectives per (method, sweep value) cell group.

    Writes aggregate.csv plus a formatted text table and returns the rows.
    """
    ok = [r for r in records if r.error is None and r.final_objective is not None]
    if not ok:
        raise ValueError("no successful runs to aggregate")
    groups: dict[tuple, list[RunRecord]] = {}
    for r in ok:
        groups.setdefault((r.method, r.sweep_value), []).append(r)

    rows = []
    for (method, sweep_value), runs in sorted(
            groups.items(), key=lambda kv: (kv[0][0], _sort_key(kv[0][1]))):
        finals = np.array([r.final_objective for r in runs], dtype=float)
        ratios = np.array([
            r.final_phi_d / r.final_phi_w for r in runs
            if r.final_phi_w and r.final_phi_w > 0], dtype=float)
        stalls = np.array([r.steps_to_stall for r in runs
                           if r.steps_to_stall is not None], dtype=float)
        rows.append({
            "method": method,
            "sweep_value": "" if sweep_value is None else sweep_value,
            "n": len(runs),
            "mean": float(np.mean(finals)),
            "std": float(np.std(finals)),
            "min": float(np.min(finals)),
            "max": float(np.max(finals)),
            "median": float(np.median(finals)),
            "mean_steps_to_stall": float(np.mean(stalls)) if stalls.size else 0.0,
            "mean_ratio_d_over_w": float(np.mean(ratios)) if ratios.size else 0.0,
        })

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0].keys())
    with (out_dir / "aggregate.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v)
                        for k, v in row.items()})
    widths = {c: max(len(c), *(len(_cell_text(r[c])) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for r in rows:
        lines.append("  ".join(_cell_text(r[c]).ljust(widths[c]) for c in cols))
    (out_dir / "aggregate.txt").write_text("\n".join(lines) + "\n")
    return rows


def _sort_key(value):
    return (0, float(value)) if isinstance(value, (int, float)) else (1, 0.0)


def _cell_text(v) -> str:
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def export_plots(records: list[RunRecord], out_dir: str | Path) -> list[str]:
    """Regenerate convergence plots from trace CSVs alone."""
    out_dir = Path(out_dir)
    by_value: dict = {}
    for r in records:
        if r.error is not None or r.trace_path is None:
            continue
        data = read_trace_csv(r.trace_path)
        by_value.setdefault(r.sweep_value, {}).setdefault(r.method, []).append(
            (data["step"], data["best_objective"]))
    written = []
    for sweep_value, curves in sorted(by_value.items(),
                                      key=lambda kv: _sort_key(kv[0])):
        tag = "all" if sweep_value is None else f"{sweep_value:g}"
        path = out_dir / f"convergence_{tag}.png"
        save_convergence_png(curves, path,
                             title=f"best objective vs step ({tag})")
        written.append(str(path))
    return written


def load_records(out_dir: str | Path) -> list[RunRecord]:
    """Rehydrate run records from an output tree's meta.json files."""
    records = []
    for meta in sorted(Path(out_dir).glob("runs/*/meta.json")):
        data = json.loads(meta.read_text())
        records.append(RunRecord(**data))
    if not records:
        raise ValueError(f"no run records under {out_dir}")
    return records
