"""Scoring layouts against the uniform-window reference.

Improvements are weighted mean ratios against the reference maps,

    phi_w = sum_m (gamma_m / gamma'_m) w_m / M
    phi_d = sum_m (I_m / I'_m) w_m / M

and the joint score is phi_o = phi_w + eta * phi_d, feasible iff
phi_d >= t_min.  Because the weights are mean-one normalised, evaluating
the reference layout itself yields phi_w = phi_d = 1 exactly.

Infeasible handling comes in two flavours:

* ``hard``: the report carries phi_o = -inf (loops that can reason about
  violations see the sentinel);
* ``soft``: phi_o = phi_w + eta * max(phi_d, 0) - 10 * max(t_min - phi_d, 0),
  which is continuous, equals the plain score on feasible points and keeps
  selection pressure informative for population methods.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import Scenario
from .daylight import IlluminanceMap, illuminance_map
from .heatmaps import render_text_grid
from .scene import Violation, WindowLayout, validate_layout
from .wireless import SumRateMap, rate_map

log = logging.getLogger(__name__)

SOFT_PENALTY = 10.0


@dataclass(frozen=True)
class BaselineCache:
    """Reference layout and its maps, keyed by the scenario hash.

    Reference maps use the analytic blockage mode (their exact expectation)
    and are floored away from zero so ratio maps stay finite.
    """

    layout: WindowLayout
    gamma: np.ndarray
    illum: np.ndarray
    scenario_hash: str

    @classmethod
    def build(cls, scenario: Scenario) -> "BaselineCache":
        layout = scenario.udw
        gamma = rate_map(layout, scenario, mode="analytic").gamma
        illum = illuminance_map(layout, scenario).total
        floor = scenario.cfg.ratio_floor
        return cls(layout=layout,
                   gamma=np.maximum(gamma, floor),
                   illum=np.maximum(illum, floor),
                   scenario_hash=scenario.hash())


def _improvement(values: np.ndarray, baseline: np.ndarray, weights: np.ndarray,
                 floor: float, cap: float) -> tuple[float, int]:
    if values.shape != baseline.shape or values.shape != weights.shape:
        raise ValueError("map, baseline and weights must have equal length")
    ratios = values / np.maximum(baseline, floor)
    n_capped = int((ratios > cap).sum())
    ratios = np.minimum(ratios, cap)
    return float((ratios * weights).sum() / weights.size), n_capped


def wireless_improvement(gamma: np.ndarray, baseline: np.ndarray,
                         weights: np.ndarray, floor: float = 1e-9,
                         cap: float = 100.0) -> float:
    phi, n_capped = _improvement(gamma, baseline, weights, floor, cap)
    if n_capped:
        log.debug("wireless ratio cap hit at %d of %d points", n_capped, gamma.size)
    return phi


def daylight_improvement(illum: np.ndarray, baseline: np.ndarray,
                         weights: np.ndarray, floor: float = 1e-9,
                         cap: float = 100.0) -> float:
    phi, n_capped = _improvement(illum, baseline, weights, floor, cap)
    if n_capped:
        log.debug("daylight ratio cap hit at %d of %d points", n_capped, illum.size)
    return phi


def joint_objective(phi_w: float, phi_d: float, eta: float,
                    t_min: float) -> tuple[float, bool]:
    """Plain joint score and the daylight-floor feasibility flag."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    return phi_w + eta * phi_d, phi_d >= t_min


def soft_objective(phi_w: float, phi_d: float, eta: float, t_min: float) -> float:
    """Penalised score, identical to the plain score on feasible points."""
    return phi_w + eta * max(phi_d, 0.0) - SOFT_PENALTY * max(t_min - phi_d, 0.0)


@dataclass
class PerformanceReport:
    phi_w: float
    phi_d: float
    phi_o: float
    feasible: bool
    violations: list[Violation] = field(default_factory=list)
    rate: Optional[SumRateMap] = None
    illum: Optional[IlluminanceMap] = None
    layout: Optional[WindowLayout] = None
    eta: float = 0.0
    wireless_text: str = ""
    daylight_text: str = ""
    wireless_image: Optional[str] = None
    daylight_image: Optional[str] = None
    baseline_hash: str = ""
    mode: str = "analytic"

    @property
    def phi_o_raw(self) -> float:
        """phi_w + eta * phi_d regardless of feasibility."""
        if math.isnan(self.phi_w) or math.isnan(self.phi_d):
            return float("-inf")
        return self.phi_w + self.eta * self.phi_d

    def rank_key(self) -> tuple[int, float]:
        """Comparator for best-solution selection: feasible first, then score."""
        return (1 if self.feasible else 0, self.phi_o_raw)

    def to_json_dict(self) -> dict:
        return {
            "phi_w": self.phi_w,
            "phi_d": self.phi_d,
            "phi_o": self.phi_o,
            "feasible": self.feasible,
            "eta": self.eta,
            "mode": self.mode,
            "violations": [{"kind": v.kind, "windows": list(v.windows),
                            "message": v.message} for v in self.violations],
            "layout": None if self.layout is None else {
                "windows": [
                    {"x": float(x), "theta_deg": math.degrees(t),
                     "psi_deg": math.degrees(p)}
                    for x, t, p in zip(self.layout.xs, self.layout.thetas,
                                       self.layout.psis)]},
            "wireless_image": self.wireless_image,
            "daylight_image": self.daylight_image,
            "baseline_hash": self.baseline_hash,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


class Evaluator:
    """Scores layouts for one scenario; pure and safe to call concurrently.

    ``infeasible_mode`` selects the phi_o reported for layouts that miss
    the daylight floor: "hard" writes the -inf sentinel, "soft" writes the
    penalised score.  Layouts violating the geometric constraints are
    reported infeasible without running any simulation.
    """

    def __init__(self, scenario: Scenario, baseline: Optional[BaselineCache] = None,
                 los_mode: str = "analytic", infeasible_mode: str = "hard",
                 mc_seed: int = 0):
        if infeasible_mode not in ("hard", "soft"):
            raise ValueError("infeasible_mode must be 'hard' or 'soft'")
        self.scenario = scenario
        self.baseline = baseline if baseline is not None else BaselineCache.build(scenario)
        if self.baseline.scenario_hash != scenario.hash():
            self.baseline = BaselineCache.build(scenario)
        self.los_mode = los_mode
        self.infeasible_mode = infeasible_mode
        self.mc_seed = mc_seed
        self.n_evaluations = 0

    def evaluate(self, layout: WindowLayout) -> PerformanceReport:
        cfg = self.scenario.cfg
        violations = validate_layout(layout, self.scenario.room, cfg.d_min,
                                     self.scenario.theta_steer_max)
        if violations:
            return PerformanceReport(
                phi_w=float("nan"), phi_d=float("nan"), phi_o=float("-inf"),
                feasible=False, violations=violations, layout=layout,
                eta=cfg.eta, baseline_hash=self.baseline.scenario_hash,
                mode=self.los_mode)

        self.n_evaluations += 1
        rm = rate_map(layout, self.scenario, mode=self.los_mode,
                      n_realizations=cfg.mc_realizations, seed=self.mc_seed)
        im = illuminance_map(layout, self.scenario)
        phi_w = wireless_improvement(rm.gamma, self.baseline.gamma,
                                     self.scenario.weights.w,
                                     cfg.ratio_floor, cfg.ratio_cap)
        phi_d = daylight_improvement(im.total, self.baseline.illum,
                                     self.scenario.weights.w,
                                     cfg.ratio_floor, cfg.ratio_cap)
        phi_o, feasible = joint_objective(phi_w, phi_d, cfg.eta, cfg.t_min_daylight)
        if not feasible:
            if self.infeasible_mode == "hard":
                phi_o = float("-inf")
            else:
                phi_o = soft_objective(phi_w, phi_d, cfg.eta, cfg.t_min_daylight)
        grid = self.scenario.grid
        return PerformanceReport(
            phi_w=phi_w, phi_d=phi_d, phi_o=phi_o, feasible=feasible,
            violations=[], rate=rm, illum=im, layout=layout, eta=cfg.eta,
            wireless_text=render_text_grid(rm.gamma, grid.n_rows, grid.n_cols),
            daylight_text=render_text_grid(im.total, grid.n_rows, grid.n_cols),
            baseline_hash=self.baseline.scenario_hash, mode=self.los_mode)


def evaluate(layout: WindowLayout, scenario: Scenario,
             baseline: Optional[BaselineCache] = None, **kwargs) -> PerformanceReport:
    """One-shot scoring; builds (or reuses) the reference cache."""
    return Evaluator(scenario, baseline=baseline, **kwargs).evaluate(layout)
