"""Multi-user communication rate map assembly and rate-bound expressions."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import convex_core
from .channel import compute_cell_stats, compute_sru_stats
from .convex_core import (MRU_STRONG, NOMA, OMA, SRU_STRONG, CellSolve,
                          RateCellProblem)
from .geometry import is_cell_blocked_by_obstacle
from .scenario import Scenario, scenario_hash

logger = logging.getLogger(__name__)

_ORDER_CODES = {None: 0, SRU_STRONG: 1, MRU_STRONG: 2}


class RateMapError(ValueError):
    pass


def noma_rate_bound(lambda_l: float, p_l: float, p_lbar: float, mu_l: float,
                    sigma2: float) -> float:
    """Expected-rate upper bound for one superposition-coded user.

    ``mu_l`` is 1 when the user suffers the other user's interference
    (weak user) and 0 when it cancels it first (strong user).
    """
    if p_l == 0:
        return 0.0
    if lambda_l <= 0:
        raise RateMapError("positive power with zero channel gain")
    return math.log2(1.0 + p_l / (mu_l * p_lbar + sigma2 / lambda_l))


def oma_rate_bound(lambda_l: float, p_l: float, sigma2: float) -> float:
    """Expected-rate upper bound for one user on half the band."""
    if p_l == 0:
        return 0.0
    if lambda_l <= 0:
        raise RateMapError("positive power with zero channel gain")
    return 0.5 * math.log2(1.0 + 2.0 * lambda_l * p_l / sigma2)


def make_cell_problem(scenario: Scenario, stats_m, stats_s, scheme: str,
                      order: str | None = None,
                      rs_target: float | None = None) -> RateCellProblem:
    """Bundle per-cell and static-user statistics into one solver problem."""
    rp = scenario.radio
    return RateCellProblem(
        row_m=np.append(stats_m.w_tilde, stats_m.h_tilde),
        row_s=np.append(stats_s.w_tilde, stats_s.h_tilde),
        tau_m=stats_m.tau,
        tau_s=stats_s.tau,
        p_max=rp.p_max_w,
        sigma2=rp.noise_w,
        rs_target=scenario.rs_target if rs_target is None else rs_target,
        scheme=scheme,
        order=order,
    )


@dataclass(frozen=True)
class CellArtifact:
    """Achieving configuration stored alongside a finite rate-map entry."""

    i: int
    j: int
    order: str | None
    theta: tuple
    p_m: float
    p_s: float
    r0: float


@dataclass(frozen=True)
class RateMap:
    """Maximum feasible mobile-user rate per cell (bit/s/Hz).

    Untraversable and solver-infeasible cells both hold ``-inf`` in
    ``values`` but are distinguished by the ``traversable``/``feasible``
    masks.
    """

    values: np.ndarray
    traversable: np.ndarray
    feasible: np.ndarray
    orders: np.ndarray  # int8 codes, see _ORDER_CODES
    grid: object
    scheme: str
    rs_target: float
    scenario_hash: str
    artifacts: tuple
    stall_probes: int

    @property
    def all_infeasible(self) -> bool:
        return bool(self.traversable.any()) and not bool(self.feasible.any())


def solve_cell(scenario: Scenario, i: int, j: int, scheme: str,
               rs_target: float | None = None, eps0: float = convex_core.EPS0,
               ) -> tuple[CellSolve, str | None]:
    """Best rate solve for one cell; NOMA tries both decoding orders."""
    stats_m = compute_cell_stats(scenario, i, j)
    stats_s = compute_sru_stats(scenario)
    if scheme == OMA:
        prob = make_cell_problem(scenario, stats_m, stats_s, OMA,
                                 rs_target=rs_target)
        return convex_core.solve_oma_cell(prob, eps0=eps0), None
    best: CellSolve | None = None
    best_order = None
    for order in (SRU_STRONG, MRU_STRONG):
        prob = make_cell_problem(scenario, stats_m, stats_s, NOMA, order=order,
                                 rs_target=rs_target)
        res = convex_core.bisection_max_rate(prob, eps0=eps0)
        if best is None or _solve_rate(res) > _solve_rate(best):
            best, best_order = res, order
    assert best is not None
    return best, (best_order if best.status == convex_core.FEASIBLE else None)


def _solve_rate(res: CellSolve) -> float:
    return res.r0 if res.status == convex_core.FEASIBLE else -math.inf


def _solve_cell_task(args):
    scenario, i, j, scheme, rs_target, eps0 = args
    res, order = solve_cell(scenario, i, j, scheme, rs_target, eps0)
    stalls = res.stall_count
    if res.status != convex_core.FEASIBLE:
        return i, j, None, stalls
    theta = tuple(float(t) for t in res.phases)
    art = CellArtifact(i=i, j=j, order=order, theta=theta,
                       p_m=res.state.p_m, p_s=res.state.p_s, r0=res.r0)
    return i, j, art, stalls


def build_rate_map(scenario: Scenario, scheme: str,
                   rs_target: float | None = None,
                   eps0: float = convex_core.EPS0,
                   workers: int = 1) -> RateMap:
    """Run the per-cell rate solve over every traversable cell.

    Cells are independent; ``workers`` > 1 fans them out to a process pool.
    Output is deterministic regardless of worker count.
    """
    if scheme not in (NOMA, OMA):
        raise RateMapError(f"unknown scheme {scheme!r}")
    g = scenario.grid
    rs = scenario.rs_target if rs_target is None else rs_target

    cells = [
        (i, j)
        for i in range(1, g.nx + 1)
        for j in range(1, g.ny + 1)
        if not is_cell_blocked_by_obstacle(scenario, i, j)
    ]
    tasks = [(scenario, i, j, scheme, rs, eps0) for i, j in cells]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_cell_task, tasks, chunksize=4))
    else:
        results = [_solve_cell_task(t) for t in tasks]

    values = np.full((g.nx, g.ny), -np.inf)
    traversable = np.zeros((g.nx, g.ny), dtype=bool)
    feasible = np.zeros((g.nx, g.ny), dtype=bool)
    orders = np.zeros((g.nx, g.ny), dtype=np.int8)
    artifacts = []
    stall_total = 0
    for i, j, art, stalls in results:
        traversable[i - 1, j - 1] = True
        stall_total += stalls
        if art is None:
            continue
        values[i - 1, j - 1] = art.r0
        feasible[i - 1, j - 1] = True
        orders[i - 1, j - 1] = _ORDER_CODES[art.order]
        artifacts.append(art)

    if stall_total:
        logger.warning("rate map build hit %d stalled probes", stall_total)
    return RateMap(
        values=values,
        traversable=traversable,
        feasible=feasible,
        orders=orders,
        grid=g,
        scheme=scheme,
        rs_target=rs,
        scenario_hash=scenario_hash(scenario),
        artifacts=tuple(artifacts),
        stall_probes=stall_total,
    )


def artifact_rate(scenario: Scenario, art: CellArtifact, scheme: str,
                  rs_target: float) -> tuple[float, float]:
    """(mobile, static) rate bounds reproduced from a stored configuration."""
    stats_m = compute_cell_stats(scenario, art.i, art.j)
    stats_s = compute_sru_stats(scenario)
    prob = make_cell_problem(scenario, stats_m, stats_s, scheme,
                             order=art.order, rs_target=rs_target)
    lam_m, lam_s = convex_core.phase_gains(prob, np.array(art.theta))
    s2 = scenario.radio.noise_w
    if scheme == OMA:
        return (oma_rate_bound(lam_m, art.p_m, s2),
                oma_rate_bound(lam_s, art.p_s, s2))
    mu_m = 1.0 if art.order == SRU_STRONG else 0.0
    mu_s = 1.0 - mu_m
    return (
        noma_rate_bound(lam_m, art.p_m, art.p_s, mu_m, s2),
        noma_rate_bound(lam_s, art.p_s, art.p_m, mu_s, s2),
    )
