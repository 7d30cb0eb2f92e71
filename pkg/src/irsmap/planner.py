"""Threshold feasibility masks, grid graphs, and shortest-path planning.

A radio map plus a QoS threshold yields a boolean feasible map; feasible
cells become graph vertices, 8-neighborhood pairs become edges weighted by
cell-center distance, and Dijkstra returns the minimum-distance path. Ties
are broken toward the lexicographically smallest predecessor so identical
inputs always give identical waypoint sequences.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Grid, cell_center, snap_to_cell

_TIE_TOL = 1e-12


class PlannerError(ValueError):
    pass


class InfeasibleEndpointError(PlannerError):
    """Start or goal cell is untraversable or below the QoS threshold."""


@dataclass(frozen=True)
class FeasibleMap:
    mask: np.ndarray  # bool, shape (nx, ny)
    threshold: float
    grid: Grid


@dataclass(frozen=True)
class GridGraph:
    vertices: tuple
    adjacency: dict  # (i, j) -> tuple of ((i', j'), weight)
    grid: Grid


@dataclass(frozen=True)
class PlannedPath:
    waypoints: tuple  # ordered (i, j) cell indices, 1-based
    total_distance: float
    travel_time: float
    values: tuple  # map value at each waypoint
    threshold: float

    def positions(self, grid: Grid, height: float = 0.0):
        return [cell_center(grid, i, j, height) for i, j in self.waypoints]


def threshold_map(radio_map, threshold: float) -> FeasibleMap:
    """Cells whose map value meets the threshold; -inf cells never qualify."""
    mask = radio_map.values >= threshold
    mask &= radio_map.traversable
    return FeasibleMap(mask=mask, threshold=threshold, grid=radio_map.grid)


def build_graph(feasible: FeasibleMap, grid: Grid | None = None) -> GridGraph:
    """Undirected graph over feasible cells with 8-neighborhood edges."""
    grid = grid or feasible.grid
    mask = feasible.mask
    nx, ny = mask.shape
    dx, dy = grid.delta_x, grid.delta_y
    diag = math.hypot(dx, dy)
    step_w = {(1, 0): dx, (-1, 0): dx, (0, 1): dy, (0, -1): dy,
              (1, 1): diag, (1, -1): diag, (-1, 1): diag, (-1, -1): diag}

    vertices = [
        (i + 1, j + 1) for i in range(nx) for j in range(ny) if mask[i, j]
    ]
    adjacency = {}
    vset = set(vertices)
    for (i, j) in vertices:
        nbrs = []
        for (di, dj), w in step_w.items():
            v = (i + di, j + dj)
            if v in vset:
                nbrs.append((v, w))
        nbrs.sort(key=lambda t: t[0])
        adjacency[(i, j)] = tuple(nbrs)
    return GridGraph(vertices=tuple(vertices), adjacency=adjacency, grid=grid)


def shortest_path_distances(graph: GridGraph, start) -> tuple[dict, dict]:
    """Dijkstra distances and predecessors from ``start`` to every vertex."""
    if start not in graph.adjacency:
        raise InfeasibleEndpointError(f"start cell {start} is not a feasible vertex")
    dist = {start: 0.0}
    pred = {}
    done = set()
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in graph.adjacency[u]:
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif v not in done and abs(nd - dist[v]) <= _TIE_TOL and u < pred[v]:
                pred[v] = u
    return dist, pred


def shortest_path(graph: GridGraph, start, goal) -> PlannedPath | None:
    """Minimum-distance path between two feasible cells, or None if disconnected."""
    if start not in graph.adjacency:
        raise InfeasibleEndpointError(f"start cell {start} is not a feasible vertex")
    if goal not in graph.adjacency:
        raise InfeasibleEndpointError(f"goal cell {goal} is not a feasible vertex")
    dist, pred = shortest_path_distances(graph, start)
    if goal not in dist:
        return None
    waypoints = [goal]
    while waypoints[-1] != start:
        waypoints.append(pred[waypoints[-1]])
    waypoints.reverse()
    return PlannedPath(
        waypoints=tuple(waypoints),
        total_distance=dist[goal],
        travel_time=0.0,
        values=(),
        threshold=float("nan"),
    )


def plan(scenario, radio_map, threshold: float) -> PlannedPath | None:
    """Threshold the map, build the graph, and plan start -> goal.

    Returns None when start and goal are disconnected; raises
    InfeasibleEndpointError when either endpoint cell fails the threshold.
    """
    grid = radio_map.grid
    snap_limit = math.hypot(grid.delta_x, grid.delta_y) / 2.0 + 1e-9
    cells = []
    for p in (scenario.q_start, scenario.q_goal):
        i, j, snap = snap_to_cell(grid, p.x, p.y)
        if snap > snap_limit:
            raise PlannerError(
                f"endpoint ({p.x}, {p.y}) is {snap:.3f} m from the nearest "
                f"cell center, beyond the {snap_limit:.3f} m snap limit"
            )
        cells.append((i, j))
    start, goal = cells

    feasible = threshold_map(radio_map, threshold)
    graph = build_graph(feasible, grid)
    raw = shortest_path(graph, start, goal)
    if raw is None:
        return None
    values = tuple(float(radio_map.values[i - 1, j - 1]) for i, j in raw.waypoints)
    return PlannedPath(
        waypoints=raw.waypoints,
        total_distance=raw.total_distance,
        travel_time=raw.total_distance / scenario.v_max,
        values=values,
        threshold=threshold,
    )
