"""Prompt construction for the model-in-the-loop optimizers.

A :class:`PromptBundle` carries five information categories (task
description, environment, I/O format, bounded history, instruction
knowledge) and renders them to a byte-stable message sequence, so a prompt
is a pure function of its parts and responses can be cached or replayed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Optional

import numpy as np

from .heatmaps import render_text_grid
from .objective import PerformanceReport

if TYPE_CHECKING:  # pragma: no cover
    from .config import Scenario

HISTORY_DEPTH = 5

_KNOWLEDGE = """\
- Received power through a window scales with the steered unit sum: beams
  aimed at heavy-traffic points raise the weighted sum rate sharply, while
  boresight beams at workplane height mostly overshoot the desks.
- Window apertures drive daylight: the sky view factor of a point grows
  when windows sit near it along the facade, and the uniform bounce term
  grows with total admitted flux.
- Moving all windows toward the user hotspot trades edge coverage for
  hotspot gain; the daylight floor constraint limits how far clustering
  can go before the score is rejected.
- Respect the minimum spacing: proposals violating it are discarded."""


@dataclass(frozen=True)
class PromptBundle:
    task_description: str
    environment_info: str
    io_format: str
    history: tuple[str, ...] = ()
    instruction_knowledge: str = ""

    def render_text(self) -> str:
        parts = ["## Task\n" + self.task_description,
                 "## Environment\n" + self.environment_info,
                 "## Input and output format\n" + self.io_format]
        if self.history:
            parts.append("## History (oldest first)\n" + "\n".join(self.history))
        if self.instruction_knowledge:
            parts.append("## Knowledge\n" + self.instruction_knowledge)
        return "\n\n".join(parts)

    def render_messages(self) -> list[dict]:
        return [{"role": "user", "content": self.render_text()}]


def _schema_block(n: int) -> str:
    return (
        'Reply with exactly one JSON object of the form\n'
        '{"windows": [{"x": <metres>, "theta_deg": <degrees>, '
        '"psi_deg": <degrees>}, ...]}\n'
        f'containing {n} window entries with strictly ascending x.')


def _environment_block(scenario: "Scenario") -> str:
    cfg = scenario.cfg
    room = scenario.room
    summary = scenario.weight_summary()
    hot = "; ".join(f"({h['x']}, {h['y']}) w={h['weight']}" for h in summary["hotspots"])
    return "\n".join([
        f"room: {room.length} m facade (x from {room.x0} to {room.x1}), "
        f"{room.width} m deep, {room.height} m high; interior at y > {room.y0}",
        f"windows: N = {room.n_windows}, each {room.win_width} m wide x "
        f"{room.win_height} m tall, centre height {room.win_center_z} m",
        f"window centre x must lie in [{room.wall_lo}, {room.wall_hi}] m",
        f"transmitter: at ({cfg.bs_x}, {cfg.bs_y}), height {cfg.h_t} m, "
        f"{cfg.n_t} antennas, {cfg.u_units} surface units per window",
        f"user weight field: centroid ({summary['centroid_x']}, "
        f"{summary['centroid_y']}), heaviest cells {hot}",
        f"eta = {cfg.eta}",
        f"constraints: window spacing d_min = {cfg.d_min} m; daylight "
        f"improvement phi_d >= {cfg.t_min_daylight}",
        f"steering: theta_deg in [0, {cfg.theta_steer_max_deg}], psi_deg free",
    ])


def build_init_prompt(scenario: "Scenario") -> PromptBundle:
    """First-contact prompt: task, environment and the strict output schema."""
    cfg = scenario.cfg
    task = (
        "Choose window centre positions along the facade and a beam "
        "direction (theta_deg from the inward wall normal, psi_deg in the "
        "wall plane, 0 = along the facade, 90 = up) for the transmissive "
        "surface on each window.  Maximise phi_o = phi_w + eta * phi_d, "
        "the weighted sum-rate improvement plus eta times the weighted "
        "daylight improvement over the evenly spaced boresight reference, "
        f"subject to phi_d >= {cfg.t_min_daylight} and pairwise window "
        f"spacing >= {cfg.d_min} m.")
    return PromptBundle(task_description=task,
                        environment_info=_environment_block(scenario),
                        io_format=_schema_block(scenario.room.n_windows))


@dataclass(frozen=True)
class FeedbackPayload:
    """Scores plus renderable heatmaps for one evaluated layout."""

    phi_w: float
    phi_d: float
    phi_o: float
    feasible: bool
    violations: tuple[str, ...]
    wireless_grid: str
    daylight_grid: str
    wireless_image: Optional[str] = None
    daylight_image: Optional[str] = None

    @classmethod
    def from_report(cls, report: PerformanceReport, scenario: "Scenario",
                    image_dir: Optional[str] = None,
                    tag: str = "step") -> "FeedbackPayload":
        grid = scenario.grid
        wtext = report.wireless_text
        dtext = report.daylight_text
        wimg = dimg = None
        if image_dir is not None and report.rate is not None:
            from .plots import save_heatmap_png
            extent = (grid.room.x0, grid.room.x1, grid.room.y0, grid.room.y1)
            wimg = save_heatmap_png(report.rate.gamma, grid.n_rows, grid.n_cols,
                                    Path(image_dir) / f"wireless_{tag}.png",
                                    title="sum rate (bit/s)", extent=extent)
            dimg = save_heatmap_png(report.illum.total, grid.n_rows, grid.n_cols,
                                    Path(image_dir) / f"daylight_{tag}.png",
                                    title="illuminance (lux)", extent=extent)
        return cls(phi_w=report.phi_w, phi_d=report.phi_d, phi_o=report.phi_o,
                   feasible=report.feasible,
                   violations=tuple(v.message for v in report.violations),
                   wireless_grid=wtext, daylight_grid=dtext,
                   wireless_image=wimg, daylight_image=dimg)

    def render(self) -> str:
        lines = [f"phi_w = {self.phi_w:.6f}",
                 f"phi_d = {self.phi_d:.6f}",
                 f"phi_o = {self.phi_o:.6f}",
                 f"feasible = {str(self.feasible).lower()}"]
        if self.violations:
            lines.append("violations: " + "; ".join(self.violations))
        lines.append("wireless heatmap (0 low .. 9 high, row 0 nearest facade):")
        lines.append(self.wireless_grid)
        lines.append("daylight heatmap (0 low .. 9 high):")
        lines.append(self.daylight_grid)
        return "\n".join(lines)

    def image_paths(self) -> list[str]:
        return [p for p in (self.wireless_image, self.daylight_image) if p]


def history_entry(layout, payload: FeedbackPayload) -> str:
    xs = ", ".join(f"{x:.3f}" for x in layout.xs)
    return (f"windows x=[{xs}] -> phi_w={payload.phi_w:.4f} "
            f"phi_d={payload.phi_d:.4f} phi_o={payload.phi_o:.4f}")


def build_feedback_prompt(scenario: "Scenario", history: tuple[str, ...],
                          payload: FeedbackPayload) -> PromptBundle:
    """Iteration prompt: latest scores, heatmaps and the bounded history ring."""
    if not history:
        raise ValueError("feedback prompt requires at least one history entry")
    task = ("Propose the next window layout, improving phi_o over the best "
            "seen so far.  Use the feedback below.")
    env = _environment_block(scenario) + "\n\nLatest evaluation:\n" + payload.render()
    return PromptBundle(task_description=task,
                        environment_info=env,
                        io_format=_schema_block(scenario.room.n_windows),
                        history=tuple(history[-HISTORY_DEPTH:]),
                        instruction_knowledge=_KNOWLEDGE)


def build_lhs_init_prompt(scenario: "Scenario", pool: tuple[str, ...],
                          population_size: int) -> PromptBundle:
    """Ask for an algorithm pick, hyper-parameters and a starting population."""
    task = (
        "Select the best suited search algorithm from the registered pool "
        f"{list(pool)}, propose its hyper-parameters and an initial "
        f"population of {population_size} candidate layouts for the window "
        "placement problem described below.")
    fmt = (
        'Reply with exactly one JSON object of the form\n'
        '{"algorithm": "<name from the pool>", "hyper_parameters": '
        '{"population_size": int, "crossover_prob": float, "mutation_prob": '
        'float, "elite_count": int, "temp_high": float, "temp_low": float, '
        '"cooling": float}, "population": [<window objects>]}\n'
        "where each population member is "
        '{"windows": [{"x":, "theta_deg":, "psi_deg":}, ...]} with '
        f"{scenario.room.n_windows} entries.")
    return PromptBundle(task_description=task,
                        environment_info=_environment_block(scenario),
                        io_format=fmt)


def build_lhs_update_prompt(scenario: "Scenario", history: tuple[str, ...],
                            payload: FeedbackPayload) -> PromptBundle:
    """Ask for replacement individuals given the chunk's best result."""
    task = ("The search ran a refinement chunk; its best solution and scores "
            "are below.  Propose up to 5 replacement individuals to inject "
            "into the population (diverse, constraint-respecting).")
    env = _environment_block(scenario) + "\n\nBest of chunk:\n" + payload.render()
    fmt = ('Reply with exactly one JSON object of the form '
           '{"inject": [{"windows": [{"x":, "theta_deg":, "psi_deg":}, ...]}, ...]} '
           "(the list may be empty).")
    return PromptBundle(task_description=task, environment_info=env,
                        io_format=fmt, history=tuple(history[-HISTORY_DEPTH:]),
                        instruction_knowledge=_KNOWLEDGE)


def render_heatmap(values: np.ndarray, n_rows: int, n_cols: int, bins: int = 10,
                   image_path: Optional[str] = None,
                   title: str = "") -> tuple[str, Optional[str]]:
    """Text raster of a map plus, optionally, a PNG written to disk.

    Both renderings derive from the same snapshot of ``values``.
    """
    text = render_text_grid(values, n_rows, n_cols, bins)
    path = None
    if image_path is not None:
        from .plots import save_heatmap_png
        path = save_heatmap_png(values, n_rows, n_cols, image_path, title=title)
    return text, path
