"""Deterministic workplane illuminance from sun and sky through the windows.

The model keeps the four-way decomposition

    I = I_sky_direct + I_sky_indirect + I_sun_direct + I_sun_indirect

with a parametric sky (direct-normal sun illuminance E_dn, diffuse
horizontal sky illuminance E_sky) instead of measured weather data:

* sun direct: horizontal beam illuminance E_dn sin(elevation) times the
  glazing transmittance, gated by a reverse ray-aperture test;
* sky direct: E_sky * beta * view factor of the window rectangles from the
  point, for a uniform-luminance sky seen through the apertures;
* indirect: a spatially uniform two-bounce ambient term from the total
  admitted flux and the area-weighted mean surface reflectance, split
  between the sky and sun shares of that flux.

Sun angles: ``theta_d`` is the zenith angle (86 deg means a 4 deg solar
elevation) and ``psi_d`` the compass-style azimuth measured clockwise from
the +y room axis; the facade outward normal points along -y, i.e. azimuth
180 deg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .scene import MeasurementGrid, RoomSpec, WindowLayout

if TYPE_CHECKING:  # pragma: no cover
    from .config import Scenario


@dataclass(frozen=True)
class DaylightParams:
    theta_d_deg: float       # sun zenith angle
    psi_d_deg: float         # sun azimuth, clockwise from +y
    e_dn_lux: float          # direct-normal sun illuminance
    e_sky_lux: float         # diffuse horizontal sky illuminance
    glazing_beta: float      # transmittance of the glazing, 0..1
    f_wall: float
    f_floor: float
    f_ceil: float

    def __post_init__(self):
        for name in ("glazing_beta", "f_wall", "f_floor", "f_ceil"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.e_dn_lux < 0 or self.e_sky_lux < 0:
            raise ValueError("illuminances must be non-negative")


def sun_vector(theta_d_deg: float, psi_d_deg: float) -> np.ndarray:
    """Unit direction of travel of sunlight (from the sun toward the scene)."""
    zen = math.radians(theta_d_deg)
    azi = math.radians(psi_d_deg)
    toward_sun = np.array([math.sin(zen) * math.sin(azi),
                           math.sin(zen) * math.cos(azi),
                           math.cos(zen)])
    return -toward_sun


def sun_elevation(theta_d_deg: float) -> float:
    """Solar elevation above the horizon, radians."""
    return math.radians(90.0 - theta_d_deg)


# ---------------------------------------------------------------------------
# View factors
# ---------------------------------------------------------------------------

def vf_corner_parallel(a: float, b: float, c: float) -> float:
    """Differential element to an a x b rectangle at distance c, planes parallel,
    one rectangle corner on the element normal."""
    aa, bb = a / c, b / c
    ra = math.sqrt(1.0 + aa * aa)
    rb = math.sqrt(1.0 + bb * bb)
    return (aa / ra * math.atan(bb / ra) + bb / rb * math.atan(aa / rb)) / (2.0 * math.pi)


def _vf_corner_perp(w: np.ndarray, h: np.ndarray, d: float) -> np.ndarray:
    """Element to a w x h rectangle in a perpendicular plane at distance d.

    The rectangle stands on the element's plane with one corner straight
    ahead; w extends sideways, h upward.  Vectorised over w and h.
    """
    r = np.sqrt(d * d + h * h)
    return (np.arctan(w / d) - d / r * np.arctan(w / r)) / (2.0 * math.pi)


def vf_point_to_wall_rect(du1: float | np.ndarray, du2, dv1, dv2, depth) -> np.ndarray:
    """View factor from an up-facing element to a vertical wall rectangle.

    (du1, du2) are the signed horizontal offsets of the rectangle edges
    from the point (along the wall), (dv1, dv2) the signed vertical offsets
    and ``depth`` the perpendicular distance to the wall plane.  The part
    of the rectangle below the element plane cannot illuminate an upward
    face and is clipped away.  Vectorised over any broadcastable inputs.
    """
    du1, du2, dv1, dv2, depth = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (du1, du2, dv1, dv2, depth)))
    v1 = np.maximum(dv1, 0.0)
    v2 = np.maximum(dv2, 0.0)

    def corner(u, v):
        return np.sign(u) * _vf_corner_perp(np.abs(u), v, depth)

    vf = corner(du2, v2) - corner(du1, v2) - corner(du2, v1) + corner(du1, v1)
    return np.maximum(vf, 0.0)


# ---------------------------------------------------------------------------
# Illuminance terms
# ---------------------------------------------------------------------------

def direct_sun(point: np.ndarray, layout: WindowLayout, room: RoomSpec,
               params: DaylightParams) -> float:
    """Direct beam illuminance at one workplane point (lux)."""
    elev = sun_elevation(params.theta_d_deg)
    if elev <= 0:
        return 0.0
    mask = _sun_aperture_mask(np.asarray([point[0]], dtype=float),
                              np.asarray([point[1]], dtype=float),
                              float(point[2]), layout, room, params)
    return float(mask[0]) * params.e_dn_lux * math.sin(elev) * params.glazing_beta


def _sun_aperture_mask(px: np.ndarray, py: np.ndarray, pz: float,
                       layout: WindowLayout, room: RoomSpec,
                       params: DaylightParams) -> np.ndarray:
    """True where the reverse ray toward the sun exits through some window."""
    s = -sun_vector(params.theta_d_deg, params.psi_d_deg)   # toward the sun
    if s[2] <= 0 or s[1] >= 0:
        # sun below horizon, or on the interior side of the facade plane
        return np.zeros_like(px, dtype=bool)
    t = (room.y0 - py) / s[1]
    xi = px + t * s[0]
    zi = pz + t * s[2]
    hit = np.zeros_like(px, dtype=bool)
    for n in range(layout.n):
        hit |= ((np.abs(xi - layout.xs[n]) <= room.win_width / 2)
                & (np.abs(zi - room.win_center_z) <= room.win_height / 2))
    return hit


def direct_sky(point: np.ndarray, layout: WindowLayout, room: RoomSpec,
               params: DaylightParams) -> float:
    """Diffuse sky illuminance received through all windows at one point (lux)."""
    vf = _sky_view_factors(np.asarray([point[0]]), np.asarray([point[1]]),
                           point[2], layout, room)
    return float(params.e_sky_lux * params.glazing_beta * vf[0])


def _sky_view_factors(px: np.ndarray, py: np.ndarray, pz: float,
                      layout: WindowLayout, room: RoomSpec) -> np.ndarray:
    depth = py - room.y0
    total = np.zeros_like(px)
    z_lo = room.win_center_z - room.win_height / 2 - pz
    z_hi = room.win_center_z + room.win_height / 2 - pz
    for n in range(layout.n):
        u1 = layout.xs[n] - room.win_width / 2 - px
        u2 = layout.xs[n] + room.win_width / 2 - px
        total = total + vf_point_to_wall_rect(u1, u2, z_lo, z_hi, depth)
    return total


def indirect_two_bounce(layout: WindowLayout, room: RoomSpec,
                        params: DaylightParams) -> tuple[float, float]:
    """Uniform ambient illuminance (sky share, sun share), lux.

    Admitted flux per window: the aperture area times the transmittance
    times (E_sky / 2 + E_dn cos(theta_inc) if the sun strikes the facade).
    Two reflection orders off the mean-reflectance interior distribute
    Phi (F + F^2) / A_total evenly over the room.
    """
    a_win = room.win_width * room.win_height
    s = -sun_vector(params.theta_d_deg, params.psi_d_deg)
    cos_inc = float(s @ np.array([0.0, -1.0, 0.0]))     # facade outward normal
    sun_on_facade = max(cos_inc, 0.0) if s[2] > 0 else 0.0

    flux_sky = layout.n * a_win * params.glazing_beta * params.e_sky_lux / 2.0
    flux_sun = layout.n * a_win * params.glazing_beta * params.e_dn_lux * sun_on_facade

    a_walls = 2.0 * room.height * (room.length + room.width)
    a_floor = room.length * room.width
    a_total = a_walls + 2.0 * a_floor
    f_mean = (a_walls * params.f_wall + a_floor * params.f_floor
              + a_floor * params.f_ceil) / a_total
    gain = (f_mean + f_mean ** 2) / a_total
    return flux_sky * gain, flux_sun * gain


@dataclass(frozen=True)
class IlluminanceMap:
    """Per-point illuminance and its four components (lux)."""

    total: np.ndarray
    sky_direct: np.ndarray
    sky_indirect: np.ndarray
    sun_direct: np.ndarray
    sun_indirect: np.ndarray
    layout_key: tuple


def illuminance_map(layout: WindowLayout, scenario: "Scenario") -> IlluminanceMap:
    """Deterministic illuminance at every grid point."""
    room, grid, params = scenario.room, scenario.grid, scenario.daylight
    px, py, pz = grid.xs, grid.ys, grid.workplane_z

    sky_dir = params.e_sky_lux * params.glazing_beta * _sky_view_factors(
        px, py, pz, layout, room)

    elev = sun_elevation(params.theta_d_deg)
    if elev > 0:
        beam = params.e_dn_lux * math.sin(elev) * params.glazing_beta
        sun_dir = beam * _sun_aperture_mask(px, py, pz, layout, room, params)
    else:
        sun_dir = np.zeros_like(px)

    amb_sky, amb_sun = indirect_two_bounce(layout, room, params)
    sky_ind = np.full_like(px, amb_sky)
    sun_ind = np.full_like(px, amb_sun)

    total = sky_dir + sky_ind + sun_dir + sun_ind
    return IlluminanceMap(total=total, sky_direct=sky_dir, sky_indirect=sky_ind,
                          sun_direct=sun_dir, sun_indirect=sun_ind,
                          layout_key=layout.key())
