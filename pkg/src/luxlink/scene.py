"""Immutable scene geometry: room, measurement grid, user weights, blockages, layouts.

Coordinate convention used throughout the package:

* planar axes (x, y) in metres, z up;
* the room footprint spans ``x in [x0, x0 + length]`` and
  ``y in [y0, y0 + width]``;
* the facade (the long wall carrying the windows) is the wall ``y = y0``,
  its outward normal points along ``-y`` and the room interior lies at
  ``y > y0``;
* the base station sits outside the room at ``y < y0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _frozen_array(values, shape_hint=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape_hint is not None and arr.shape != shape_hint:
        raise ValueError(f"expected shape {shape_hint}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RoomSpec:
    """Rectangular room with N equal windows on the facade wall ``y = y0``."""

    width: float            # room depth perpendicular to the facade (m)
    length: float           # facade wall length (m)
    height: float           # floor-to-ceiling (m)
    x0: float               # near corner abscissa (m)
    y0: float               # facade wall ordinate (m)
    n_windows: int
    win_width: float        # window extent along the facade (m)
    win_height: float       # window vertical extent (m)
    win_center_z: float     # height of window centres above the floor (m)

    def __post_init__(self):
        if min(self.width, self.length, self.height, self.win_width, self.win_height) <= 0:
            raise ValueError("room and window dimensions must be positive")
        if self.n_windows < 1:
            raise ValueError("need at least one window")
        if self.n_windows * self.win_width > self.length:
            raise ValueError("windows do not fit on the facade")
        if self.win_center_z - self.win_height / 2 < 0 or self.win_center_z + self.win_height / 2 > self.height:
            raise ValueError("window rectangle must lie within the wall")

    @property
    def x1(self) -> float:
        return self.x0 + self.length

    @property
    def y1(self) -> float:
        return self.y0 + self.width

    @property
    def wall_lo(self) -> float:
        """Smallest admissible window-centre abscissa."""
        return self.x0 + self.win_width / 2

    @property
    def wall_hi(self) -> float:
        """Largest admissible window-centre abscissa."""
        return self.x1 - self.win_width / 2

    def contains_planar(self, x, y) -> bool:
        return bool(self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1)


@dataclass(frozen=True)
class BaseStation:
    """Outdoor transmitter serving the room through the facade windows."""

    x: float
    y: float
    height: float
    n_antennas: int
    tx_power_w: float

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if self.tx_power_w < 0:
            raise ValueError("tx power must be non-negative")

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.height])


@dataclass(frozen=True)
class MeasurementGrid:
    """Regular lattice of indoor measurement points at workplane height.

    Points are stored row-major: row 0 is the row nearest the facade,
    rows advance with y (depth) and columns with x (along the facade),
    so ``index = row * n_cols + col``.  The lattice is inset half a
    spacing from every wall.
    """

    xs: np.ndarray          # (M,)
    ys: np.ndarray          # (M,)
    n_rows: int
    n_cols: int
    spacing: float
    workplane_z: float
    room: RoomSpec

    @property
    def m(self) -> int:
        return self.n_rows * self.n_cols

    def points(self) -> np.ndarray:
        """(M, 2) planar coordinates in storage order."""
        return np.column_stack([self.xs, self.ys])

    def depth_norm(self) -> np.ndarray:
        """Per-point distance from the facade, normalised to (0, 1)."""
        return (self.ys - self.room.y0) / self.room.width

    def along_norm(self) -> np.ndarray:
        """Per-point position along the facade, normalised to (0, 1)."""
        return (self.xs - self.room.x0) / self.room.length


def build_grid(room: RoomSpec, spacing: float, workplane_z: float) -> MeasurementGrid:
    """Lay out the measurement lattice inside the room footprint."""
    if not 0 < spacing < min(room.width, room.length):
        raise ValueError(f"spacing {spacing} leaves no interior point in a "
                         f"{room.length} x {room.width} room")
    n_cols = int(math.floor(room.length / spacing + 1e-9))
    n_rows = int(math.floor(room.width / spacing + 1e-9))
    if n_cols < 1 or n_rows < 1:
        raise ValueError("spacing too large for any interior point")
    col_x = room.x0 + spacing * (np.arange(n_cols) + 0.5)
    row_y = room.y0 + spacing * (np.arange(n_rows) + 0.5)
    gx, gy = np.meshgrid(col_x, row_y)          # row-major: y outer, x inner
    return MeasurementGrid(
        xs=_frozen_array(gx.ravel()),
        ys=_frozen_array(gy.ravel()),
        n_rows=n_rows,
        n_cols=n_cols,
        spacing=spacing,
        workplane_z=workplane_z,
        room=room,
    )


def _beta_pdf(x: np.ndarray, a: float, b: float) -> np.ndarray:
    log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    return np.exp(log_norm + (a - 1) * np.log(x) + (b - 1) * np.log(1 - x))


@dataclass(frozen=True)
class WeightMatrix:
    """Per-point user weights from a separable 2-D beta law, mean-one normalised.

    The first shape pair (a1, b1) acts on the depth-from-facade coordinate,
    the second pair (a2, b2) on the along-facade coordinate; both are
    normalised room coordinates in (0, 1).  Weights are rescaled so that
    they sum to M, hence a layout identical to the reference scores
    exactly 1 under the weighted-mean improvement metrics.
    """

    w: np.ndarray
    shapes: tuple[float, float, float, float]

    @property
    def m(self) -> int:
        return self.w.size


def user_weights(grid: MeasurementGrid, shapes: tuple[float, float, float, float]) -> WeightMatrix:
    a1, b1, a2, b2 = shapes
    if min(a1, b1, a2, b2) <= 0:
        raise ValueError("beta shape parameters must be positive")
    w = _beta_pdf(grid.depth_norm(), a1, b1) * _beta_pdf(grid.along_norm(), a2, b2)
    w = w * (grid.m / w.sum())
    return WeightMatrix(w=_frozen_array(w), shapes=(a1, b1, a2, b2))


@dataclass(frozen=True)
class BlockageField:
    """One realisation of the indoor cylinder process, plus its statistics."""

    density: float          # cylinders per m^2
    radius: float           # m
    seed: int
    centers: np.ndarray     # (K, 2)

    @property
    def count(self) -> int:
        return self.centers.shape[0]


def sample_blockages(room: RoomSpec, density: float, radius: float, seed: int) -> BlockageField:
    """Draw cylinder centres from a homogeneous Poisson process on the footprint."""
    if density < 0:
        raise ValueError("density must be non-negative")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    count = rng.poisson(density * room.width * room.length)
    xs = rng.uniform(room.x0, room.x1, size=count)
    ys = rng.uniform(room.y0, room.y1, size=count)
    return BlockageField(density=density, radius=radius, seed=seed,
                         centers=_frozen_array(np.column_stack([xs, ys])))


@dataclass(frozen=True)
class WindowLayout:
    """Decision variables: window-centre abscissas plus per-window beam angles.

    Angles are in radians in the board frame of the facade: elevation
    ``theta`` is measured from the inward wall normal, azimuth ``psi``
    rotates in the wall plane from the along-facade axis towards vertical
    (``psi = pi/2`` tilts the beam up).  ``theta = 0`` is boresight.
    """

    xs: np.ndarray          # (N,) centre abscissas, expected ascending
    thetas: np.ndarray      # (N,) steering elevations (rad)
    psis: np.ndarray        # (N,) steering azimuths (rad)

    def __post_init__(self):
        n = np.asarray(self.xs).size
        object.__setattr__(self, "xs", _frozen_array(self.xs, (n,)))
        object.__setattr__(self, "thetas", _frozen_array(self.thetas, (n,)))
        object.__setattr__(self, "psis", _frozen_array(self.psis, (n,)))

    @property
    def n(self) -> int:
        return self.xs.size

    def key(self) -> tuple:
        """Hashable snapshot of the decision variables."""
        return tuple(self.xs) + tuple(self.thetas) + tuple(self.psis)

    def window_center(self, room: RoomSpec, n: int) -> np.ndarray:
        if not 0 <= n < self.n:
            raise IndexError(f"window index {n} out of range for {self.n} windows")
        return np.array([self.xs[n], room.y0, room.win_center_z])


def udw_layout(room: RoomSpec) -> WindowLayout:
    """Reference layout: equally spaced windows with boresight beams.

    Centres sit at ``x0 + (k - 1/2) * length / N`` for k = 1..N, which gives
    equal margins at both wall ends.
    """
    n = room.n_windows
    ks = np.arange(1, n + 1)
    xs = room.x0 + (ks - 0.5) * room.length / n
    return WindowLayout(xs=xs, thetas=np.zeros(n), psis=np.zeros(n))


@dataclass(frozen=True)
class Violation:
    """A single violated layout constraint; indices are 1-based for messages."""

    kind: str                    # "spacing" | "bounds" | "angle"
    windows: tuple[int, ...]
    message: str


def validate_layout(layout: WindowLayout, room: RoomSpec, d_min: float,
                    theta_max: float = math.pi / 2) -> list[Violation]:
    """Return every violated constraint; an empty list means feasible.

    Checks, in order: pairwise centre spacing >= d_min (this also catches
    unsorted abscissas), window rectangles inside the wall extent, and
    steering elevations inside the cone [0, theta_max].
    """
    out: list[Violation] = []
    xs = layout.xs
    for k in range(layout.n - 1):
        gap = xs[k + 1] - xs[k]
        if gap < d_min:
            out.append(Violation(
                kind="spacing", windows=(k + 1, k + 2),
                message=f"windows ({k + 1},{k + 2}) are {gap:.3f} m apart, need >= {d_min} m"))
    lo, hi = room.wall_lo, room.wall_hi
    for k in range(layout.n):
        if not lo <= xs[k] <= hi:
            out.append(Violation(
                kind="bounds", windows=(k + 1,),
                message=f"window {k + 1} centre {xs[k]:.3f} m outside wall span "
                        f"[{lo:.3f}, {hi:.3f}] m"))
    for k in range(layout.n):
        th = layout.thetas[k]
        if not 0 <= th <= theta_max:
            out.append(Violation(
                kind="angle", windows=(k + 1,),
                message=f"window {k + 1} elevation {math.degrees(th):.1f} deg outside "
                        f"[0, {math.degrees(theta_max):.1f}] deg"))
    return out
