"""Scenario configuration: file format, defaults and the assembled world.

The scenario file is flat JSON (or TOML) whose keys follow the parameter
names of the modelled setup, e.g.::

    {"lambda_m": 0.01, "omega_db": 5.0, "n_t": 32, "l_r": 20.0, "w_r": 10.0,
     "p_t": 1.0, "x_b": 20.0, "y_b": 30.0, "h_t": 10.0, "win_l": 1.2,
     "win_w": 0.9, "r_block": 0.2, "rho": 0.01, "d_x": 0.005, "d_y": 0.005,
     "u_units": 900, "f_w": 0.6, "f_f": 0.4, "f_c": 0.7, "eta": 5.0,
     "psi_d_deg": 220.0, "theta_d_deg": 86.0, "d_min": 0.9,
     "t_min_daylight": 0.8, "t_i_init": 5.0, "n_windows": 2}

Unknown keys are rejected.  ``g`` and ``h_b`` are accepted and stored but
take no part in any computation (``g`` has no defined meaning here and
``h_b`` is building-height metadata).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .daylight import DaylightParams
from .scene import (BaseStation, MeasurementGrid, RoomSpec, WeightMatrix,
                    WindowLayout, build_grid, udw_layout, user_weights)
from .wireless import ChannelParams


def nearest_square(u: int) -> int:
    """Round a requested unit count to the nearest perfect square."""
    root = max(1, round(math.sqrt(u)))
    candidates = [(root - 1) ** 2, root ** 2, (root + 1) ** 2]
    return min((c for c in candidates if c >= 1), key=lambda c: abs(c - u))


@dataclass(frozen=True)
class ScenarioConfig:
    # channel
    lambda_m: float = 0.01
    omega_db: float = 5.0
    n_t: int = 32
    p_t: float = 1.0
    d_x: float = 0.005
    d_y: float = 0.005
    u_units: int = 900
    bandwidth_hz: float = 1.0e8
    noise_power_w: float = 10.0 ** (-12.4)   # -94 dBm, thermal floor at 100 MHz
    # room and windows
    l_r: float = 20.0
    w_r: float = 10.0
    h_r: float = 3.0
    x_b: float = 20.0
    y_b: float = 30.0
    n_windows: int = 2
    win_l: float = 1.2            # vertical window extent
    win_w: float = 0.9            # horizontal window extent
    win_center_height: float = 1.5
    # transmitter
    bs_x: float = 0.0
    bs_y: float = 0.0
    h_t: float = 10.0
    # blockage statistics
    rho: float = 0.01
    r_block: float = 0.2
    # measurement grid and user weights
    grid_spacing: float = 1.0
    workplane_height: float = 0.8
    beta_a1: float = 2.0
    beta_b1: float = 2.0
    beta_a2: float = 2.0
    beta_b2: float = 2.0
    # daylight
    theta_d_deg: float = 86.0
    psi_d_deg: float = 220.0
    e_dn_lux: float = 5000.0
    e_sky_lux: float = 8000.0
    glazing_beta: float = 0.70
    f_w: float = 0.6
    f_f: float = 0.4
    f_c: float = 0.7
    # objective
    eta: float = 5.0
    t_min_daylight: float = 0.8
    d_min: float = 0.9
    ratio_floor: float = 1e-9
    ratio_cap: float = 100.0
    # optimizer-facing
    t_i_init: float = 5.0
    theta_steer_max_deg: float = 75.0
    mc_realizations: int = 20_000
    # accepted but unused (no defined role in the computation)
    g: float = 8.0
    h_b: float = 30.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **kwargs) -> "ScenarioConfig":
        return dataclasses.replace(self, **kwargs)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def load_scenario_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if path.suffix.lower() == ".toml":
        import tomllib
        data = tomllib.loads(path.read_text())
    else:
        data = json.loads(path.read_text())
    return ScenarioConfig.from_dict(data)


def save_scenario_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


class Scenario:
    """The immutable world assembled from a :class:`ScenarioConfig`.

    Construction is cheap and single-threaded; every derived object is
    read-only afterwards, so one instance can be shared across parallel
    evaluations.
    """

    def __init__(self, cfg: ScenarioConfig):
        if cfg.u_units != nearest_square(cfg.u_units):
            cfg = cfg.replace(u_units=nearest_square(cfg.u_units))
        self.cfg = cfg
        self.room = RoomSpec(
            width=cfg.w_r, length=cfg.l_r, height=cfg.h_r,
            x0=cfg.x_b, y0=cfg.y_b, n_windows=cfg.n_windows,
            win_width=cfg.win_w, win_height=cfg.win_l,
            win_center_z=cfg.win_center_height)
        self.bs = BaseStation(x=cfg.bs_x, y=cfg.bs_y, height=cfg.h_t,
                              n_antennas=cfg.n_t, tx_power_w=cfg.p_t)
        self.grid = build_grid(self.room, cfg.grid_spacing, cfg.workplane_height)
        self.weights = user_weights(
            self.grid, (cfg.beta_a1, cfg.beta_b1, cfg.beta_a2, cfg.beta_b2))
        self.channel = ChannelParams(
            wavelength=cfg.lambda_m, d_x=cfg.d_x, d_y=cfg.d_y, units=cfg.u_units,
            omega_db=cfg.omega_db, bandwidth_hz=cfg.bandwidth_hz,
            noise_power_w=cfg.noise_power_w, tx_power_w=cfg.p_t,
            n_antennas=cfg.n_t)
        self.daylight = DaylightParams(
            theta_d_deg=cfg.theta_d_deg, psi_d_deg=cfg.psi_d_deg,
            e_dn_lux=cfg.e_dn_lux, e_sky_lux=cfg.e_sky_lux,
            glazing_beta=cfg.glazing_beta, f_wall=cfg.f_w, f_floor=cfg.f_f,
            f_ceil=cfg.f_c)

    @classmethod
    def from_file(cls, path: str | Path) -> "Scenario":
        return cls(load_scenario_config(path))

    @property
    def theta_steer_max(self) -> float:
        return math.radians(self.cfg.theta_steer_max_deg)

    @cached_property
    def udw(self) -> WindowLayout:
        return udw_layout(self.room)

    def hash(self) -> str:
        return self.cfg.hash()

    def weight_summary(self) -> dict:
        """Centroid and heaviest cells of the user-weight field, for prompts."""
        w = self.weights.w
        cx = float((w * self.grid.xs).sum() / w.sum())
        cy = float((w * self.grid.ys).sum() / w.sum())
        top = np.argsort(w)[::-1][:3]
        hotspots = [
            {"x": round(float(self.grid.xs[i]), 2),
             "y": round(float(self.grid.ys[i]), 2),
             "weight": round(float(w[i]), 3)}
            for i in top
        ]
        return {"centroid_x": round(cx, 3), "centroid_y": round(cy, 3),
                "hotspots": hotspots}
