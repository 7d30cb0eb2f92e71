"""Indoor environment geometry: room, axis-aligned obstacles, grid cells, line of sight.

All types are immutable after construction and all queries are pure, so they
are safe to call from any number of concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# A wireless link is tested against the closed obstacle boxes, but contact
# confined to the segment endpoints does not count as blockage (an antenna
# sitting exactly on top of a box must not be occluded by that box). Contact
# anywhere in the interior, including tangential grazing, blocks the link.
_ENDPOINT_CLEARANCE = 1e-9
_SLAB_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid geometric input (out-of-range index, degenerate segment, ...)."""


@dataclass(frozen=True)
class Point3:
    """A location in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise GeometryError("point coordinates must be finite")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


def distance(a: Point3, b: Point3) -> float:
    """Euclidean distance in meters."""
    return math.dist(a.as_tuple(), b.as_tuple())


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned box resting on the floor, occupying z in [0, height]."""

    center_x: float
    center_y: float
    size_x: float
    size_y: float
    height: float

    def __post_init__(self) -> None:
        if self.size_x <= 0 or self.size_y <= 0 or self.height <= 0:
            raise GeometryError("obstacle sizes must be positive")

    def footprint_contains(self, x: float, y: float) -> bool:
        """Closed horizontal footprint: boundary points count as covered."""
        return (
            abs(x - self.center_x) <= self.size_x / 2.0
            and abs(y - self.center_y) <= self.size_y / 2.0
        )

    def bounds(self) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
        """((xlo, xhi), (ylo, yhi), (zlo, zhi)) of the closed box."""
        return (
            (self.center_x - self.size_x / 2.0, self.center_x + self.size_x / 2.0),
            (self.center_y - self.size_y / 2.0, self.center_y + self.size_y / 2.0),
            (0.0, self.height),
        )


@dataclass(frozen=True)
class Grid:
    """Uniform cell grid; ``(origin_x, origin_y)`` is the lower-left cell center.

    Cell indices are 1-based: cell (1, 1) is centered on the origin and cell
    (nx, ny) on the opposite corner.
    """

    origin_x: float
    origin_y: float
    delta_x: float
    delta_y: float
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if self.delta_x <= 0 or self.delta_y <= 0:
            raise GeometryError("grid resolution must be positive")
        if self.nx < 1 or self.ny < 1:
            raise GeometryError("grid must have at least one cell per axis")


def make_grid(extent_x: float, extent_y: float, delta_x: float, delta_y: float,
              epsilon: float) -> Grid:
    """Discretize a room of the given extents (centered on the origin).

    The resolution must satisfy ``delta <= epsilon * extent`` per axis and
    divide the extent into an integer number of cells.
    """
    if delta_x > epsilon * extent_x + 1e-12 or delta_y > epsilon * extent_y + 1e-12:
        raise GeometryError(
            f"grid resolution ({delta_x}, {delta_y}) exceeds accuracy bound "
            f"eps*extent = ({epsilon * extent_x}, {epsilon * extent_y})"
        )
    nx = round(extent_x / delta_x)
    ny = round(extent_y / delta_y)
    if abs(nx * delta_x - extent_x) > 1e-9 or abs(ny * delta_y - extent_y) > 1e-9:
        raise GeometryError("grid resolution must divide the room extent exactly")
    return Grid(
        origin_x=-extent_x / 2.0 + delta_x / 2.0,
        origin_y=-extent_y / 2.0 + delta_y / 2.0,
        delta_x=delta_x,
        delta_y=delta_y,
        nx=nx,
        ny=ny,
    )


def cell_center(grid: Grid, i: int, j: int, height: float = 0.0) -> Point3:
    """Center of cell (i, j), 1-based, at the given antenna height."""
    if not (1 <= i <= grid.nx) or not (1 <= j <= grid.ny):
        raise GeometryError(f"cell index ({i}, {j}) outside grid {grid.nx}x{grid.ny}")
    return Point3(
        grid.origin_x + (i - 1) * grid.delta_x,
        grid.origin_y + (j - 1) * grid.delta_y,
        height,
    )


def snap_to_cell(grid: Grid, x: float, y: float) -> tuple[int, int, float]:
    """Nearest cell (i, j) to the horizontal point, plus the snap distance.

    Ties go to the lower index so snapping is deterministic.
    """
    def _axis(v: float, origin: float, delta: float, n: int) -> int:
        frac = (v - origin) / delta
        k = math.floor(frac)
        idx = k if (frac - k) <= 0.5 else k + 1
        return min(max(idx, 0), n - 1) + 1

    i = _axis(x, grid.origin_x, grid.delta_x, grid.nx)
    j = _axis(y, grid.origin_y, grid.delta_y, grid.ny)
    c = cell_center(grid, i, j)
    return i, j, math.hypot(x - c.x, y - c.y)


def _segment_hits_box(a: Point3, b: Point3, obstacle: Obstacle) -> bool:
    """Slab test of the open segment a->b against the closed box.

    Interior contact of any kind (including grazing a face or edge) counts as
    a hit; contact restricted to the segment endpoints does not.
    """
    t0, t1 = 0.0, 1.0
    for (lo, hi), pa, pb in zip(obstacle.bounds(), a.as_tuple(), b.as_tuple()):
        d = pb - pa
        if abs(d) < 1e-15:
            if pa < lo or pa > hi:
                return False
            continue
        ta = (lo - pa) / d
        tb = (hi - pa) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1 + _SLAB_TOL:
            return False
    return t0 <= 1.0 - _ENDPOINT_CLEARANCE and t1 >= _ENDPOINT_CLEARANCE


def segment_blocked(obstacles, a: Point3, b: Point3) -> bool:
    """True iff the open segment between two points intersects any obstacle."""
    if a.as_tuple() == b.as_tuple():
        raise GeometryError("line-of-sight query requires two distinct points")
    return any(_segment_hits_box(a, b, ob) for ob in obstacles)


def has_line_of_sight(scenario, a: Point3, b: Point3) -> bool:
    """True iff no obstacle of the scenario blocks the open segment a-b."""
    return not segment_blocked(scenario.obstacles, a, b)


def is_cell_blocked_by_obstacle(scenario, i: int, j: int) -> bool:
    """True iff the cell center lies within the footprint of any obstacle."""
    c = cell_center(scenario.grid, i, j)
    return any(ob.footprint_contains(c.x, c.y) for ob in scenario.obstacles)


def count_blocked_cells(scenario) -> int:
    """Number of grid cells whose center is covered by an obstacle footprint."""
    g = scenario.grid
    return sum(
        1
        for i in range(1, g.nx + 1)
        for j in range(1, g.ny + 1)
        if is_cell_blocked_by_obstacle(scenario, i, j)
    )
