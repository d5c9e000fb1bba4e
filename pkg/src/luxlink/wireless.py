"""Transmissive-surface wireless model: unit phases, received power, blockage, rate.

Board frame of a window at (x_n, y0, z_c): local axis u runs along the
facade (+x), v points up (+z) and the normal axis is y.  For a unit ray
direction d = (dx, dy, dz) the angle pair (theta, psi) satisfies

    sin(theta) cos(psi) = dx      (u component)
    sin(theta) sin(psi) = dz      (v component)
    cos(theta)          = |dy|    (normal component)

so the transverse wave-vector components used by the unit phase formulas
are exactly the (x, z) components of the ray direction.

Received power for the surface on window n:

    P_n = Pt Nt^2 dx^2 dy^2 lambda^2 cos(theta_t) omega^2 |AF|^2
          / (16 pi^2 d1^2 d2^2)

with AF = sum_{i,j} exp(-j phi_{n,i,j}) over the sqrt(U) x sqrt(U) units,
d1 the transmitter-to-window distance, d2 the window-to-point distance and
omega the amplitude penetration factor 10^(-omega_db/20).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .scene import BaseStation, RoomSpec, WindowLayout

if TYPE_CHECKING:  # pragma: no cover
    from .config import Scenario

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ChannelParams:
    """Carrier, surface and link-budget constants."""

    wavelength: float        # m
    d_x: float               # unit pitch along the facade (m)
    d_y: float               # unit pitch vertical (m)
    units: int               # total unit count, must be a perfect square
    omega_db: float          # penetration loss through the glazing (dB, power)
    bandwidth_hz: float
    noise_power_w: float
    tx_power_w: float
    n_antennas: int

    def __post_init__(self):
        if min(self.wavelength, self.d_x, self.d_y, self.bandwidth_hz) <= 0:
            raise ValueError("wavelength, pitches and bandwidth must be positive")
        if self.noise_power_w <= 0:
            raise ValueError("noise power must be positive")
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        root = math.isqrt(self.units)
        if root * root != self.units:
            raise ValueError(f"unit count {self.units} is not a perfect square")

    @property
    def side(self) -> int:
        return math.isqrt(self.units)

    @property
    def omega_amp(self) -> float:
        """Amplitude transmission factor; its square is the power transmission."""
        return 10.0 ** (-self.omega_db / 20.0)


@dataclass(frozen=True)
class LinkGeometry:
    """Distance plus board-frame elevation/azimuth of one ray."""

    distance: float
    theta: float             # rad, from the board normal, in [0, pi/2)
    psi: float               # rad, in the board plane, in [0, 2*pi)

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("distance must be positive")

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "LinkGeometry":
        """Build from a displacement vector in room coordinates."""
        vec = np.asarray(vec, dtype=float)
        d = float(np.linalg.norm(vec))
        if d <= 0:
            raise ValueError("zero-length ray")
        u, ny, v = vec[0] / d, vec[1] / d, vec[2] / d
        theta = math.acos(min(1.0, abs(ny)))
        psi = math.atan2(v, u) % TWO_PI
        return cls(distance=d, theta=theta, psi=psi)

    @property
    def trans_u(self) -> float:
        """sin(theta) cos(psi): transverse component along the facade."""
        return math.sin(self.theta) * math.cos(self.psi)

    @property
    def trans_v(self) -> float:
        """sin(theta) sin(psi): transverse component up the facade."""
        return math.sin(self.theta) * math.sin(self.psi)


def bs_window_geometry(bs: BaseStation, layout: WindowLayout, room: RoomSpec,
                       n: int) -> LinkGeometry:
    """Geometry of the incident ray from the transmitter to window n (0-based)."""
    center = layout.window_center(room, n)
    if abs(bs.y - room.y0) < 1e-12:
        raise ValueError("transmitter lies in the facade plane; geometry degenerate")
    return LinkGeometry.from_vector(center - bs.position())


def _phase_raw(i: int, j: int, a: LinkGeometry, b: LinkGeometry,
               params: ChannelParams) -> float:
    """-2 pi / lambda * ((au + bu) u_i + (av + bv) v_j) for unit (i, j), 1-based."""
    u_i = (i - 0.5) * params.d_x
    v_j = (j - 0.5) * params.d_y
    return (-TWO_PI / params.wavelength
            * ((a.trans_u + b.trans_u) * u_i + (a.trans_v + b.trans_v) * v_j))


def array_phase(i: int, j: int, incident: LinkGeometry, depart: LinkGeometry,
                steer: LinkGeometry, params: ChannelParams) -> float:
    """Residual phase of unit (i, j), in [0, 2*pi); i and j are 1-based.

    The positional phase (incident plus actual departure) minus the unit
    field pattern (incident plus desired departure); the incident part
    cancels in the difference, so only the departure mismatch remains.
    """
    side = params.side
    if not (1 <= i <= side and 1 <= j <= side):
        raise ValueError(f"unit index ({i},{j}) outside 1..{side}")
    phi_a = _phase_raw(i, j, incident, depart, params) % TWO_PI
    phi_r = _phase_raw(i, j, incident, steer, params) % TWO_PI
    return (phi_a - phi_r) % TWO_PI


def _dirichlet(half_arg: float, k: int) -> complex:
    """sum_{i=1..k} exp(+2j * half_arg * (i - 1/2)) in closed form.

    The summand is exp(-j phi) with phi = -2 g (i - 1/2), hence the
    positive sign in the exponent.
    """
    s = math.sin(half_arg)
    if abs(s) < 1e-12:
        # coherent limit at g = m*pi, where the ratio tends to +/- k
        ratio = k * math.cos(k * half_arg) / math.cos(half_arg)
    else:
        ratio = math.sin(k * half_arg) / s
    return complex(np.exp(1j * k * half_arg) * ratio)


def array_factor(incident: LinkGeometry, depart: LinkGeometry, steer: LinkGeometry,
                 params: ChannelParams, method: str = "closed") -> complex:
    """Coherent unit sum AF = sum_{i,j} exp(-j phi_{n,i,j}).

    ``method="sum"`` evaluates the double sum unit by unit; ``"closed"``
    uses the separable geometric-series identity (identical value, O(1)).
    """
    k = params.side
    du = depart.trans_u - steer.trans_u
    dv = depart.trans_v - steer.trans_v
    gu = math.pi / params.wavelength * du * params.d_x
    gv = math.pi / params.wavelength * dv * params.d_y
    if method == "closed":
        return complex(_dirichlet(gu, k) * _dirichlet(gv, k))
    if method == "sum":
        total = 0.0 + 0.0j
        for i, j in itertools.product(range(1, k + 1), range(1, k + 1)):
            total += np.exp(-1j * array_phase(i, j, incident, depart, steer, params))
        return complex(total)
    raise ValueError(f"unknown array-factor method {method!r}")


def _dirichlet_mag(half_arg: np.ndarray, k: int) -> np.ndarray:
    """|sum_{i=1..k} exp(-2j g (i-1/2))| = |sin(k g) / sin(g)|, vectorised."""
    s = np.sin(half_arg)
    small = np.abs(s) < 1e-12
    safe = np.where(small, 1.0, s)
    out = np.abs(np.sin(k * half_arg) / safe)
    return np.where(small, float(k), out)


def received_power(params: ChannelParams, bs: BaseStation, layout: WindowLayout,
                   room: RoomSpec, n: int, point: np.ndarray,
                   method: str = "closed") -> float:
    """Average received power (W) at ``point`` from the surface on window n."""
    point = np.asarray(point, dtype=float)
    center = layout.window_center(room, n)
    incident = bs_window_geometry(bs, layout, room, n)
    depart = LinkGeometry.from_vector(point - center)
    steer = LinkGeometry(distance=1.0, theta=float(layout.thetas[n]),
                         psi=float(layout.psis[n]))
    af = abs(array_factor(incident, depart, steer, params, method=method))
    c = (params.tx_power_w * params.n_antennas ** 2 * params.d_x ** 2
         * params.d_y ** 2 * params.wavelength ** 2 * params.omega_amp ** 2
         / (16.0 * math.pi ** 2))
    return c * math.cos(incident.theta) * af ** 2 / (incident.distance ** 2
                                                     * depart.distance ** 2)


# ---------------------------------------------------------------------------
# Blockage / line-of-sight
# ---------------------------------------------------------------------------

def los_probability_single(d_xy: float, density: float, radius: float) -> float:
    """Probability that no cylinder intersects a planar segment of length d_xy.

    A cylinder of radius R blocks the segment when its centre falls inside
    the stadium of area 2 R d + pi R^2 around it, so under a homogeneous
    Poisson process of density rho the clear probability is
    exp(-rho (2 R d + pi R^2)).
    """
    if density < 0:
        raise ValueError("density must be non-negative")
    return math.exp(-density * (2.0 * radius * d_xy + math.pi * radius ** 2))


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Planar distances from ``points`` (K, 2) to segment a-b."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def mc_subset_probabilities(segments: Sequence[tuple[np.ndarray, np.ndarray]],
                            density: float, radius: float,
                            n_realizations: int, seed: int) -> np.ndarray:
    """Monte-Carlo joint clear/blocked frequencies for a set of planar segments.

    Cylinders are drawn on the bounding box of all segments inflated by the
    cylinder radius, so no blocking centre is ever truncated away and the
    estimate is comparable to the boundless closed form.  Returns an array
    of length 2^N where entry ``mask`` is the empirical probability that
    exactly the segments with a set bit in ``mask`` are clear.
    """
    n_seg = len(segments)
    ends = np.array([[a, b] for a, b in segments], dtype=float)  # (N, 2, 2)
    pad = radius + 1e-9
    lo = ends.reshape(-1, 2).min(axis=0) - pad
    hi = ends.reshape(-1, 2).max(axis=0) + pad
    area = float(np.prod(hi - lo))

    rng = np.random.default_rng(seed)
    counts = rng.poisson(density * area, size=n_realizations)
    total = int(counts.sum())
    pts = rng.uniform(lo, hi, size=(total, 2))
    real_idx = np.repeat(np.arange(n_realizations), counts)

    clear_mask = np.zeros(n_realizations, dtype=np.int64)
    for s in range(n_seg):
        if total:
            dist = _segment_distance(pts, ends[s, 0], ends[s, 1])
            hits = np.bincount(real_idx[dist <= radius], minlength=n_realizations)
            clear = hits == 0
        else:
            clear = np.ones(n_realizations, dtype=bool)
        clear_mask |= clear.astype(np.int64) << s

    freq = np.bincount(clear_mask, minlength=2 ** n_seg).astype(float)
    return freq / n_realizations


def _window_point_segments(layout: WindowLayout, room: RoomSpec,
                           point_xy: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(np.array([layout.xs[n], room.y0]), np.asarray(point_xy, dtype=float))
            for n in range(layout.n)]


def los_probability_set(z: Iterable[int], layout: WindowLayout, room: RoomSpec,
                        point_xy: np.ndarray, density: float, radius: float,
                        mode: str = "independence", n_realizations: int = 100_000,
                        seed: int = 0) -> float:
    """Probability that exactly the windows in ``z`` (0-based) are clear.

    ``independence`` multiplies per-window marginals; ``monte-carlo``
    estimates the joint event on shared cylinder fields, which captures the
    positive correlation of links passing near the same blockers.
    """
    z = sorted(set(z))
    if not z:
        raise ValueError("window subset must be nonempty")
    if any(not 0 <= n < layout.n for n in z):
        raise ValueError("window index out of range")
    if mode == "independence":
        prob = 1.0
        for n in range(layout.n):
            d = float(np.hypot(layout.xs[n] - point_xy[0], room.y0 - point_xy[1]))
            p = los_probability_single(d, density, radius)
            prob *= p if n in z else (1.0 - p)
        return prob
    if mode == "monte-carlo":
        segs = _window_point_segments(layout, room, point_xy)
        freq = mc_subset_probabilities(segs, density, radius, n_realizations, seed)
        mask = sum(1 << n for n in z)
        return float(freq[mask])
    raise ValueError(f"unknown LoS mode {mode!r}")


# ---------------------------------------------------------------------------
# Expected rate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SumRateMap:
    """Per-point expected rate (bit/s) for one layout."""

    gamma: np.ndarray        # (M,)
    layout_key: tuple
    mode: str                # "analytic" | "monte-carlo"


def _subset_rates(amps: np.ndarray, bandwidth: float, noise: float) -> np.ndarray:
    """Rates (2^N,) for every clear-window subset given per-window amplitudes.

    amps is (N,) of sqrt(P_n); entry ``mask`` combines the members of the
    subset coherently.  mask 0 (everything blocked) carries zero rate.
    """
    n = amps.size
    out = np.zeros(2 ** n)
    for mask in range(1, 2 ** n):
        s = sum(amps[b] for b in range(n) if mask >> b & 1)
        out[mask] = bandwidth * math.log2(1.0 + s * s / noise)
    return out


def _per_window_arrays(layout: WindowLayout, scenario: "Scenario") -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (N, M) received powers and clear probabilities over the grid."""
    room, bs, ch, grid = scenario.room, scenario.bs, scenario.channel, scenario.grid
    px, py = grid.xs, grid.ys
    pz = grid.workplane_z
    k = ch.side
    const = (ch.tx_power_w * ch.n_antennas ** 2 * ch.d_x ** 2 * ch.d_y ** 2
             * ch.wavelength ** 2 * ch.omega_amp ** 2 / (16.0 * math.pi ** 2))

    powers = np.empty((layout.n, grid.m))
    p_clear = np.empty((layout.n, grid.m))
    for n in range(layout.n):
        cx, cy, cz = layout.xs[n], room.y0, room.win_center_z
        dx1, dy1, dz1 = cx - bs.x, cy - bs.y, cz - bs.height
        d1 = math.sqrt(dx1 * dx1 + dy1 * dy1 + dz1 * dz1)
        cos_t = abs(dy1) / d1

        vx, vy, vz = px - cx, py - cy, pz - cz
        d2 = np.sqrt(vx * vx + vy * vy + vz * vz)
        eu, ev = vx / d2, vz / d2
        su = math.sin(layout.thetas[n]) * math.cos(layout.psis[n])
        sv = math.sin(layout.thetas[n]) * math.sin(layout.psis[n])
        gu = math.pi / ch.wavelength * (eu - su) * ch.d_x
        gv = math.pi / ch.wavelength * (ev - sv) * ch.d_y
        af = _dirichlet_mag(gu, k) * _dirichlet_mag(gv, k)
        powers[n] = const * cos_t * af ** 2 / (d1 * d1 * d2 * d2)

        d_xy = np.hypot(vx, vy)
        p_clear[n] = np.exp(-scenario.cfg.rho * (2.0 * scenario.cfg.r_block * d_xy
                                                 + math.pi * scenario.cfg.r_block ** 2))
    return powers, p_clear


def expected_rate(point_index: int, layout: WindowLayout, scenario: "Scenario",
                  mode: str = "analytic", n_realizations: int = 100_000,
                  seed: int = 0) -> float:
    """Blockage-averaged rate at one grid point (bit/s)."""
    powers, p_clear = _per_window_arrays(layout, scenario)
    amps = np.sqrt(powers[:, point_index])
    rates = _subset_rates(amps, scenario.channel.bandwidth_hz,
                          scenario.channel.noise_power_w)
    n = layout.n
    if mode == "analytic":
        p = p_clear[:, point_index]
        total = 0.0
        for mask in range(1, 2 ** n):
            prob = 1.0
            for b in range(n):
                prob *= p[b] if mask >> b & 1 else (1.0 - p[b])
            total += prob * rates[mask]
        return total
    if mode == "monte-carlo":
        point_xy = np.array([scenario.grid.xs[point_index], scenario.grid.ys[point_index]])
        segs = _window_point_segments(layout, scenario.room, point_xy)
        freq = mc_subset_probabilities(segs, scenario.cfg.rho, scenario.cfg.r_block,
                                       n_realizations, seed)
        return float(freq @ rates)
    raise ValueError(f"unknown LoS mode {mode!r}")


def rate_map(layout: WindowLayout, scenario: "Scenario", mode: str = "analytic",
             n_realizations: int = 20_000, seed: int = 0) -> SumRateMap:
    """Expected rate at every grid point; pure in (scenario, layout, seed)."""
    powers, p_clear = _per_window_arrays(layout, scenario)
    n, m = powers.shape
    bw = scenario.channel.bandwidth_hz
    noise = scenario.channel.noise_power_w
    amps = np.sqrt(powers)

    if mode == "analytic":
        gamma = np.zeros(m)
        for mask in range(1, 2 ** n):
            prob = np.ones(m)
            s = np.zeros(m)
            for b in range(n):
                if mask >> b & 1:
                    prob = prob * p_clear[b]
                    s = s + amps[b]
                else:
                    prob = prob * (1.0 - p_clear[b])
            gamma += prob * bw * np.log2(1.0 + s * s / noise)
    elif mode == "monte-carlo":
        gamma = _rate_map_mc(layout, scenario, amps, n_realizations, seed)
    else:
        raise ValueError(f"unknown LoS mode {mode!r}")
    return SumRateMap(gamma=gamma, layout_key=layout.key(), mode=mode)


def _rate_map_mc(layout: WindowLayout, scenario: "Scenario", amps: np.ndarray,
                 n_realizations: int, seed: int) -> np.ndarray:
    """Shared-field Monte-Carlo rate map: one cylinder world per realisation."""
    room = scenario.room
    rho, radius = scenario.cfg.rho, scenario.cfg.r_block
    grid = scenario.grid
    pad = radius + 1e-9
    lo = np.array([room.x0 - pad, room.y0 - pad])
    hi = np.array([room.x1 + pad, room.y1 + pad])
    area = float(np.prod(hi - lo))

    rng = np.random.default_rng(seed)
    counts = rng.poisson(rho * area, size=n_realizations)
    total = int(counts.sum())
    pts = rng.uniform(lo, hi, size=(total, 2))
    real_idx = np.repeat(np.arange(n_realizations), counts)

    n, m = amps.shape
    bw, noise = scenario.channel.bandwidth_hz, scenario.channel.noise_power_w
    gamma = np.zeros(m)
    for pi in range(m):
        target = np.array([grid.xs[pi], grid.ys[pi]])
        clear_mask = np.zeros(n_realizations, dtype=np.int64)
        for s in range(n):
            a = np.array([layout.xs[s], room.y0])
            if total:
                dist = _segment_distance(pts, a, target)
                hits = np.bincount(real_idx[dist <= radius], minlength=n_realizations)
                clear = hits == 0
            else:
                clear = np.ones(n_realizations, dtype=bool)
            clear_mask |= clear.astype(np.int64) << s
        freq = np.bincount(clear_mask, minlength=2 ** n).astype(float) / n_realizations
        gamma[pi] = freq @ _subset_rates(amps[:, pi], bw, noise)
    return gamma
