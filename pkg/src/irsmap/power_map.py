"""Single-user channel power gain map, discrete-phase benchmark, coverage metric."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import channel
from .channel import CellChannelStats, compute_cell_stats, expected_gain
from .geometry import is_cell_blocked_by_obstacle
from .scenario import Scenario, scenario_hash

CONTINUOUS = "continuous"

# CLI-facing aliases for the supported phase resolutions.
PHASE_MODES = {
    "cont": CONTINUOUS,
    "1bit": 2,
    "2bit": 4,
    "3bit": 8,
}


class PowerMapError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseConfig:
    """Sub-surface phase shifts, each wrapped to [0, 2*pi)."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        th = np.asarray(self.theta, dtype=float)
        if th.ndim != 1:
            raise PowerMapError("phase configuration must be a vector")
        if np.any(th < 0.0) or np.any(th >= 2.0 * np.pi):
            raise PowerMapError("phases must lie in [0, 2*pi)")
        object.__setattr__(self, "theta", th)


def wrap_phase(theta: np.ndarray) -> np.ndarray:
    """Wrap angles into [0, 2*pi), mapping an exact 2*pi to 0."""
    out = np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi)
    out[out >= 2.0 * np.pi] = 0.0
    return out


def optimal_phases(stats: CellChannelStats) -> PhaseConfig:
    """Phases aligning every cascaded component with the direct link.

    When the direct link is absent the reference phase is defined as zero;
    any common reference is equally good since only relative alignment
    matters for the combined magnitude.
    """
    ref = np.angle(stats.h_tilde) if abs(stats.h_tilde) > 0.0 else 0.0
    return PhaseConfig(wrap_phase(ref - np.angle(stats.w_tilde)))


def closed_form_max_gain(stats) -> float:
    """Phase-optimal expected gain: fully coherent combining plus the floor."""
    return float((abs(stats.h_tilde) + np.abs(stats.w_tilde).sum()) ** 2 + stats.tau)


def quantize_phases(phases: PhaseConfig, levels: int) -> PhaseConfig:
    """Map each phase to the nearest of ``levels`` uniform discrete values.

    Circular distance decides; exact ties go to the lower level so the
    result is deterministic.
    """
    if levels < 2:
        raise PowerMapError("need at least two discrete phase levels")
    grid = 2.0 * np.pi * np.arange(levels) / levels
    diff = phases.theta[:, None] - grid[None, :]
    dist = np.abs((diff + np.pi) % (2.0 * np.pi) - np.pi)
    return PhaseConfig(grid[np.argmin(dist, axis=1)])


@dataclass(frozen=True)
class PowerGainMap:
    """Expected channel power gain per cell (linear units).

    Untraversable cells hold ``-inf``; ``traversable`` carries the mask
    explicitly so serialized forms never rely on float infinities.
    """

    values: np.ndarray  # shape (nx, ny)
    traversable: np.ndarray  # bool, shape (nx, ny)
    grid: object
    phase_mode: str
    scenario_hash: str

    def value_db(self) -> np.ndarray:
        out = np.full(self.values.shape, -np.inf)
        mask = self.traversable
        out[mask] = 10.0 * np.log10(self.values[mask])
        return out


def _phase_mode_tag(phase_mode) -> str:
    if phase_mode == CONTINUOUS:
        return CONTINUOUS
    return f"discrete{int(phase_mode)}"


def cell_gain(stats: CellChannelStats, phase_mode) -> float:
    """Best achievable expected gain at one cell for the given phase mode."""
    if phase_mode == CONTINUOUS:
        return closed_form_max_gain(stats)
    levels = int(phase_mode)
    if stats.w_tilde.size == 0:
        return closed_form_max_gain(stats)  # no phases to quantize
    theta = quantize_phases(optimal_phases(stats), levels)
    return expected_gain(stats, theta.theta)


def build_power_gain_map(scenario: Scenario, phase_mode=CONTINUOUS) -> PowerGainMap:
    """Evaluate the phase-optimal (or quantized) gain at every cell center."""
    if phase_mode != CONTINUOUS and int(phase_mode) < 2:
        raise PowerMapError(f"invalid phase mode {phase_mode!r}")
    g = scenario.grid
    values = np.full((g.nx, g.ny), -np.inf)
    traversable = np.zeros((g.nx, g.ny), dtype=bool)
    for i in range(1, g.nx + 1):
        for j in range(1, g.ny + 1):
            if is_cell_blocked_by_obstacle(scenario, i, j):
                continue
            stats = compute_cell_stats(scenario, i, j)
            values[i - 1, j - 1] = cell_gain(stats, phase_mode)
            traversable[i - 1, j - 1] = True
    return PowerGainMap(
        values=values,
        traversable=traversable,
        grid=g,
        phase_mode=_phase_mode_tag(phase_mode),
        scenario_hash=scenario_hash(scenario),
    )


def coverage_fraction(pmap: PowerGainMap, gamma_bar: float) -> float:
    """Fraction of traversable cells whose value meets the linear threshold."""
    n_total = int(pmap.traversable.sum())
    if n_total == 0:
        raise PowerMapError("no traversable cells")
    ok = np.count_nonzero(pmap.values[pmap.traversable] >= gamma_bar)
    return ok / n_total


def coverage_curve(pmap: PowerGainMap, gammas_db) -> list[tuple[float, float]]:
    """(threshold dB, coverage fraction) pairs for a threshold sweep."""
    return [(g, coverage_fraction(pmap, channel.db_to_linear(g))) for g in gammas_db]
