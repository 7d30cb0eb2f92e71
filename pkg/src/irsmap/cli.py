"""Command-line orchestration: map builds, planning, validation, sweeps.

Every exported artifact embeds the scenario hash and the tolerance set that
produced it; rerunning a command with identical inputs reproduces identical
bytes. Exit codes: 0 success, 2 configuration error, 3 no feasible path,
4 infeasible QoS, 5 solver stall.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import channel, convex_core, export, planner, power_map, rate_map
from .channel import db_to_linear
from .geometry import is_cell_blocked_by_obstacle
from .power_map import CONTINUOUS, PHASE_MODES
from .scenario import ScenarioError, load_scenario, scenario_hash

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOPATH = 3
EXIT_INFEASIBLE = 4
EXIT_STALL = 5

logger = logging.getLogger(__name__)

_TOLERANCES = {
    "sdp_tol": convex_core.SDP_TOL,
    "rank_tol": convex_core.RANK_TOL,
    "sca_tol": convex_core.SCA_TOL,
    "eps0": convex_core.EPS0,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="irsmap",
        description="Radio-map construction and QoS-aware robot path planning.",
    )
    p.add_argument("--command", required=True,
                   choices=["build-power-map", "build-rate-map", "plan",
                            "validate", "sweep"])
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--phase-mode", default="cont", choices=sorted(PHASE_MODES),
                   help="IRS phase resolution for power maps")
    p.add_argument("--scheme", default="noma", choices=["noma", "oma"])
    p.add_argument("--gamma-db", type=float, default=None,
                   help="expected power gain threshold in dB")
    p.add_argument("--rate-target", type=float, default=None,
                   help="mobile-user rate threshold in bit/s/Hz")
    p.add_argument("--rs-target", type=float, default=None,
                   help="override the static user's rate floor")
    p.add_argument("--map", default=None,
                   help="previously exported map sidecar to plan on")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--eps0", type=float, default=convex_core.EPS0,
                   help="bisection accuracy in bit/s/Hz")
    p.add_argument("--samples", type=int, default=10_000,
                   help="Monte Carlo sample count")
    p.add_argument("--cells", type=int, default=10,
                   help="number of sampled cells for validation")
    p.add_argument("--sweep-kind", default="gamma",
                   choices=["gamma", "coverage", "elements", "levels",
                            "rate-target"])
    p.add_argument("--range", dest="sweep_range", default=None,
                   help="sweep range as lo:hi:count")
    p.add_argument("--values", dest="sweep_values", default=None,
                   help="comma-separated explicit sweep values")
    p.add_argument("--artifacts", action="store_true",
                   help="export per-cell phases/powers with rate maps")
    p.add_argument("--verbose", action="store_true")
    return p


def _parse_range(args) -> list[float]:
    if args.sweep_values:
        vals = [float(v) for v in args.sweep_values.split(",")]
    elif args.sweep_range:
        lo, hi, count = args.sweep_range.split(":")
        vals = list(np.linspace(float(lo), float(hi), int(count)))
    else:
        raise ScenarioError("sweep requires --range lo:hi:count or --values")
    if not vals or sorted(vals) != vals:
        raise ScenarioError("sweep range must be nonempty and ascending")
    return vals


def _phase_mode(args):
    return PHASE_MODES[args.phase_mode]


def _write_power_map(pmap: power_map.PowerGainMap, outdir: Path, tag: str) -> Path:
    export.write_map_csv(outdir / f"power_map_{tag}.csv", pmap.value_db(),
                         pmap.traversable)
    payload = export.map_sidecar_payload(
        pmap.values, pmap.traversable, pmap.grid, pmap.scenario_hash,
        units="linear expected channel power gain (CSV in dB)",
        extra={"kind": "power_map", "phase_mode": pmap.phase_mode,
               "tolerances": _TOLERANCES},
    )
    sidecar = outdir / f"power_map_{tag}.json"
    export.write_sidecar(sidecar, payload)
    return sidecar


def _write_rate_map(rmap: rate_map.RateMap, outdir: Path,
                    with_artifacts: bool) -> Path:
    tag = rmap.scheme
    vals = np.where(rmap.feasible, rmap.values, -np.inf)
    export.write_map_csv(outdir / f"rate_map_{tag}.csv", vals, rmap.feasible)
    payload = export.map_sidecar_payload(
        rmap.values, rmap.feasible, rmap.grid, rmap.scenario_hash,
        units="bit/s/Hz",
        extra={
            "kind": "rate_map",
            "scheme": rmap.scheme,
            "rs_target": rmap.rs_target,
            "traversable": rmap.traversable.astype(int).tolist(),
            "stall_probes": rmap.stall_probes,
            "tolerances": _TOLERANCES,
        },
    )
    sidecar = outdir / f"rate_map_{tag}.json"
    export.write_sidecar(sidecar, payload)
    if with_artifacts:
        arts = [
            {"i": a.i, "j": a.j, "order": a.order, "theta": list(a.theta),
             "p_m": a.p_m, "p_s": a.p_s, "r0": a.r0}
            for a in rmap.artifacts
        ]
        export.write_sidecar(outdir / f"rate_map_{tag}_artifacts.json",
                             {"scenario_hash": rmap.scenario_hash,
                              "cells": arts})
    return sidecar


class _LoadedMap:
    """Planner-compatible view of an exported map sidecar."""

    def __init__(self, payload: dict):
        from .geometry import Grid

        self.values, mask = export.sidecar_values(payload)
        g = payload["grid"]
        self.grid = Grid(g["origin"][0], g["origin"][1], g["delta"][0],
                         g["delta"][1], g["cells"][0], g["cells"][1])
        if payload.get("kind") == "rate_map":
            self.traversable = np.array(payload["traversable"], dtype=bool)
            self.feasible = mask
        else:
            self.traversable = mask
        self.kind = payload.get("kind", "power_map")


def _plan_threshold(scenario, args, radio_map, kind: str):
    if kind == "power_map":
        if args.gamma_db is None:
            raise ScenarioError("planning on a power map needs --gamma-db")
        return db_to_linear(args.gamma_db)
    if args.rate_target is None:
        raise ScenarioError("planning on a rate map needs --rate-target")
    return args.rate_target + scenario.jensen_margin


def _cmd_build_power_map(args, scenario, outdir: Path) -> int:
    pmap = power_map.build_power_gain_map(scenario, _phase_mode(args))
    sidecar = _write_power_map(pmap, outdir, pmap.phase_mode)
    finite = pmap.values[pmap.traversable]
    ref_db = args.gamma_db if args.gamma_db is not None else float(
        np.median(10.0 * np.log10(finite)))
    eta = power_map.coverage_fraction(pmap, db_to_linear(ref_db))
    print(f"power map [{pmap.phase_mode}]: "
          f"min {10 * np.log10(finite.min()):.2f} dB, "
          f"max {10 * np.log10(finite.max()):.2f} dB, "
          f"eta({ref_db:.2f} dB) = {eta:.4f} -> {sidecar}")
    return EXIT_OK


def _cmd_build_rate_map(args, scenario, outdir: Path) -> int:
    rmap = rate_map.build_rate_map(
        scenario, args.scheme, rs_target=args.rs_target,
        eps0=args.eps0, workers=args.workers,
    )
    sidecar = _write_rate_map(rmap, outdir, args.artifacts)
    if rmap.all_infeasible:
        print(f"rate map [{rmap.scheme}]: static-user floor infeasible "
              f"everywhere -> {sidecar}")
        return EXIT_INFEASIBLE
    finite = rmap.values[rmap.feasible]
    print(f"rate map [{rmap.scheme}]: min {finite.min():.3f}, "
          f"max {finite.max():.3f} bit/s/Hz, "
          f"{int(rmap.feasible.sum())}/{int(rmap.traversable.sum())} feasible "
          f"cells -> {sidecar}")
    if rmap.stall_probes > 0.01 * max(1, len(rmap.artifacts)):
        return EXIT_STALL
    return EXIT_OK


def _cmd_plan(args, scenario, outdir: Path) -> int:
    if args.map:
        loaded = _LoadedMap(export.read_sidecar(args.map))
        radio_map, kind = loaded, loaded.kind
        map_hash = export.read_sidecar(args.map)["scenario_hash"]
    elif args.rate_target is not None:
        rmap = rate_map.build_rate_map(scenario, args.scheme,
                                       rs_target=args.rs_target,
                                       eps0=args.eps0, workers=args.workers)
        radio_map, kind, map_hash = rmap, "rate_map", rmap.scenario_hash
    else:
        pmap = power_map.build_power_gain_map(scenario, _phase_mode(args))
        radio_map, kind, map_hash = pmap, "power_map", pmap.scenario_hash

    threshold = _plan_threshold(scenario, args, radio_map, kind)
    try:
        path = planner.plan(scenario, radio_map, threshold)
    except planner.InfeasibleEndpointError as exc:
        print(f"endpoint infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if path is None:
        print("no feasible path at this threshold", file=sys.stderr)
        return EXIT_NOPATH

    height = scenario.mru_height
    positions = path.positions(radio_map.grid, height)
    payload = {
        "scenario_hash": map_hash,
        "threshold": threshold,
        "map_kind": kind,
        "total_distance_m": path.total_distance,
        "travel_time_s": path.travel_time,
        "tolerances": _TOLERANCES,
        "waypoints": [
            {"i": i, "j": j, "x": p.x, "y": p.y, "value": v}
            for (i, j), p, v in zip(path.waypoints, positions, path.values)
        ],
    }
    export.write_sidecar(outdir / "path.json", payload)
    lines = [f"{p.x:.6f},{p.y:.6f},{v:.6f}" for p, v in zip(positions, path.values)]
    (outdir / "path.csv").write_text("\n".join(lines) + "\n")
    print(f"path: {len(path.waypoints)} waypoints, "
          f"{path.total_distance:.3f} m, {path.travel_time:.3f} s")
    return EXIT_OK


def _cmd_validate(args, scenario, outdir: Path) -> int:
    rng = np.random.default_rng(args.seed)
    g = scenario.grid
    free = [
        (i, j)
        for i in range(1, g.nx + 1)
        for j in range(1, g.ny + 1)
        if not is_cell_blocked_by_obstacle(scenario, i, j)
    ]
    picks = [free[k] for k in rng.choice(len(free), size=min(args.cells, len(free)),
                                         replace=False)]
    rows = []
    gain_ok = 0
    for idx, (i, j) in enumerate(picks):
        stats = channel.compute_cell_stats(scenario, i, j)
        theta = power_map.optimal_phases(stats).theta
        lam = channel.expected_gain(stats, theta)
        mean, stderr = channel.mc_expected_gain(
            scenario, i, j, theta, n_samples=args.samples,
            seed=args.seed + 1000 + idx)
        within = abs(mean - lam) <= 3.0 * stderr
        gain_ok += within

        p_half = scenario.radio.p_max_w / 2.0
        stats_s = channel.compute_sru_stats(scenario)
        lam_s = channel.expected_gain(stats_s, theta)
        order = convex_core.SRU_STRONG if lam_s >= lam else convex_core.MRU_STRONG
        mu_m = 1.0 if order == convex_core.SRU_STRONG else 0.0
        s2 = scenario.radio.noise_w
        bound_m = rate_map.noma_rate_bound(lam, p_half, p_half, mu_m, s2)
        bound_s = rate_map.noma_rate_bound(lam_s, p_half, p_half, 1.0 - mu_m, s2)
        mc = channel.mc_expected_rate(
            scenario, i, j, theta, p_half, p_half, "noma", order,
            n_samples=args.samples, seed=args.seed + 2000 + idx)
        rows.append({
            "cell": [i, j],
            "lemma_gain": lam, "mc_gain": mean, "mc_gain_stderr": stderr,
            "gain_within_3_sigma": bool(within),
            "order": order,
            "bound_m": bound_m, "mc_rate_m": mc.mean_m,
            "stderr_m": mc.stderr_m,
            "bound_s": bound_s, "mc_rate_s": mc.mean_s,
            "stderr_s": mc.stderr_s,
            "jensen_ok_m": bool(bound_m >= mc.mean_m - 3.0 * mc.stderr_m),
            "jensen_ok_s": bool(bound_s >= mc.mean_s - 3.0 * mc.stderr_s),
        })
        print(f"cell ({i:2d},{j:2d}) gain {lam:.3e} vs MC {mean:.3e} "
              f"(3sig {'ok' if within else 'FAIL'}); "
              f"rate gap m {bound_m - mc.mean_m:+.4f}, "
              f"s {bound_s - mc.mean_s:+.4f}")

    report = {
        "scenario_hash": scenario_hash(scenario),
        "samples": args.samples,
        "seed": args.seed,
        "gain_checks_passed": gain_ok,
        "gain_checks_total": len(picks),
        "cells": rows,
    }
    export.write_sidecar(outdir / "validation.json", report)
    jensen_bad = sum(1 for r in rows if not (r["jensen_ok_m"] and r["jensen_ok_s"]))
    print(f"validation: {gain_ok}/{len(picks)} gain checks within 3 sigma, "
          f"{jensen_bad} Jensen violations")
    return EXIT_OK if gain_ok == len(picks) and jensen_bad == 0 else EXIT_STALL


def _feasibility_threshold_db(scenario, pmap, lo_db: float, hi_db: float) -> float:
    """Largest threshold that still admits a path, by bisection on dB."""
    for _ in range(40):
        mid = (lo_db + hi_db) / 2.0
        try:
            path = planner.plan(scenario, pmap, db_to_linear(mid))
        except planner.InfeasibleEndpointError:
            path = None
        if path is None:
            hi_db = mid
        else:
            lo_db = mid
    return lo_db


def _cmd_sweep(args, scenario, outdir: Path) -> int:
    kind = args.sweep_kind
    rows: list[tuple] = []
    if kind in ("gamma", "coverage"):
        vals = _parse_range(args)
        pmap = power_map.build_power_gain_map(scenario, _phase_mode(args))
        for gamma_db in vals:
            if kind == "coverage":
                eta = power_map.coverage_fraction(pmap, db_to_linear(gamma_db))
                rows.append((gamma_db, eta))
                continue
            try:
                path = planner.plan(scenario, pmap, db_to_linear(gamma_db))
            except planner.InfeasibleEndpointError:
                path = None
            rows.append((gamma_db,
                         path.total_distance if path else "",
                         "ok" if path else "nopath"))
        header = "gamma_db,eta" if kind == "coverage" else "gamma_db,distance_m,status"
    elif kind == "elements":
        if args.gamma_db is None:
            raise ScenarioError("element sweep needs --gamma-db")
        from .scenario import paper_default_scenario

        vals = _parse_range(args)
        for m in vals:
            sc = paper_default_scenario(m_elements=int(m),
                                        rs_target=scenario.rs_target)
            pmap = power_map.build_power_gain_map(sc, _phase_mode(args))
            try:
                path = planner.plan(sc, pmap, db_to_linear(args.gamma_db))
            except planner.InfeasibleEndpointError:
                path = None
            rows.append((int(m),
                         path.total_distance if path else "",
                         "ok" if path else "nopath"))
        header = "elements,distance_m,status"
    elif kind == "levels":
        finite_db = []
        for mode_name in ("1bit", "2bit", "3bit", "cont"):
            pmap = power_map.build_power_gain_map(scenario, PHASE_MODES[mode_name])
            vals_db = 10.0 * np.log10(pmap.values[pmap.traversable])
            thr = _feasibility_threshold_db(
                scenario, pmap, float(vals_db.min()) - 1.0,
                float(vals_db.max()) + 1.0)
            finite_db.append((mode_name, thr))
            rows.append((mode_name, thr))
        header = "phase_mode,feasibility_threshold_db"
    else:  # rate-target sweep
        vals = _parse_range(args)
        rmap = rate_map.build_rate_map(scenario, args.scheme,
                                       rs_target=args.rs_target,
                                       eps0=args.eps0, workers=args.workers)
        for rt in vals:
            try:
                path = planner.plan(scenario, rmap, rt + scenario.jensen_margin)
            except planner.InfeasibleEndpointError:
                path = None
            rows.append((rt,
                         path.total_distance if path else "",
                         "ok" if path else "nopath"))
        header = "rate_target,distance_m,status"

    out = outdir / f"sweep_{kind}.csv"
    lines = [header] + [",".join(str(c) for c in row) for row in rows]
    out.write_text("\n".join(lines) + "\n")
    print(f"sweep [{kind}]: {len(rows)} rows -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(name)s %(levelname)s %(message)s",
    )
    try:
        scenario = load_scenario(args.scenario)
        if args.rs_target is not None and args.rs_target < 0:
            raise ScenarioError("rate floor must be nonnegative")
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "build-power-map":
            return _cmd_build_power_map(args, scenario, outdir)
        if args.command == "build-rate-map":
            return _cmd_build_rate_map(args, scenario, outdir)
        if args.command == "plan":
            return _cmd_plan(args, scenario, outdir)
        if args.command == "validate":
            return _cmd_validate(args, scenario, outdir)
        return _cmd_sweep(args, scenario, outdir)
    except (ScenarioError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except convex_core.SolverStallError as exc:
        print(f"solver stall: {exc}", file=sys.stderr)
        return EXIT_STALL


if __name__ == "__main__":
    sys.exit(main())
