"""Radio maps and QoS-aware path planning for IRS-assisted indoor environments."""

from .channel import (CellChannelStats, ChannelSample, LinkState, RadioParams,
                      SruChannelStats, compute_cell_stats, compute_point_stats,
                      compute_sru_stats, expected_gain, mc_expected_gain,
                      mc_expected_rate, pathloss_los, pathloss_nlos,
                      sample_channels)
from .convex_core import (CellSolve, RateCellProblem, SdpState, SolveReport,
                          bisection_max_rate, extract_phases,
                          sca_rank_reduction, solve_feasibility_relaxed,
                          solve_oma_cell)
from .geometry import (Grid, Obstacle, Point3, cell_center, has_line_of_sight,
                       is_cell_blocked_by_obstacle, make_grid)
from .planner import (FeasibleMap, GridGraph, PlannedPath, build_graph, plan,
                      shortest_path, threshold_map)
from .power_map import (PhaseConfig, PowerGainMap, build_power_gain_map,
                        coverage_fraction, optimal_phases, quantize_phases)
from .rate_map import (RateMap, build_rate_map, noma_rate_bound,
                       oma_rate_bound)
from .scenario import (Scenario, desk_scenario, load_scenario,
                       paper_default_scenario, save_scenario, scenario_hash,
                       toy_scenario)

__version__ = "0.1.0"
