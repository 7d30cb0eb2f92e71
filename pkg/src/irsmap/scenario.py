"""Scenario definition, JSON (de)serialization, validation, and built-in setups."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .channel import RadioParams
from .geometry import Grid, GeometryError, Obstacle, Point3, make_grid

_NORMALS = ("+x", "-x", "+y", "-y")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Full world description: room, radio gear, obstacles, grid, mission."""

    room_x: float
    room_y: float
    room_height: float
    ap: Point3
    irs_center: Point3
    irs_normal: str
    sru: Point3
    obstacles: tuple[Obstacle, ...]
    grid: Grid
    mru_height: float
    q_start: Point3
    q_goal: Point3
    v_max: float
    radio: RadioParams
    rs_target: float = 1.0
    jensen_margin: float = 0.0

    def __post_init__(self) -> None:
        if self.irs_normal not in _NORMALS:
            raise ScenarioError(f"irs normal must be one of {_NORMALS}")
        if self.v_max <= 0:
            raise ScenarioError("maximum speed must be positive")
        if self.rs_target < 0 or self.jensen_margin < 0:
            raise ScenarioError("rate targets must be nonnegative")
        hx, hy = self.room_x / 2.0, self.room_y / 2.0
        for name, p in (("start", self.q_start), ("goal", self.q_goal)):
            if abs(p.x) > hx + 1e-9 or abs(p.y) > hy + 1e-9:
                raise ScenarioError(f"{name} location lies outside the room")
            if any(ob.footprint_contains(p.x, p.y) and p.z <= ob.height
                   for ob in self.obstacles):
                raise ScenarioError(f"{name} location lies inside an obstacle")
        for name, p in (("AP", self.ap), ("IRS", self.irs_center)):
            on_wall = (
                abs(abs(p.x) - hx) <= 1e-9 or abs(abs(p.y) - hy) <= 1e-9
            )
            if not on_wall:
                raise ScenarioError(f"{name} must be mounted on a boundary wall")
        for ob in self.obstacles:
            (xlo, xhi), (ylo, yhi), _ = ob.bounds()
            if xlo < -hx - 1e-9 or xhi > hx + 1e-9 or ylo < -hy - 1e-9 or yhi > hy + 1e-9:
                raise ScenarioError("obstacle extends beyond the room")


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "room": {"size_x": sc.room_x, "size_y": sc.room_y, "height": sc.room_height},
        "grid": {
            "delta_x": sc.grid.delta_x,
            "delta_y": sc.grid.delta_y,
            "epsilon": max(sc.grid.delta_x / sc.room_x, sc.grid.delta_y / sc.room_y),
        },
        "ap": list(sc.ap.as_tuple()),
        "irs": {
            "center": list(sc.irs_center.as_tuple()),
            "normal": sc.irs_normal,
            "sub_surfaces": {"nx": sc.radio.n_sub_x, "nz": sc.radio.n_sub_z},
            "elements_per_sub": {
                "nx": sc.radio.elems_per_sub_x,
                "nz": sc.radio.elems_per_sub_z,
            },
            "element_spacing_wavelengths": sc.radio.element_spacing_wl,
        },
        "sru": list(sc.sru.as_tuple()),
        "obstacles": [
            {
                "center": [ob.center_x, ob.center_y],
                "size": [ob.size_x, ob.size_y],
                "height": ob.height,
            }
            for ob in sc.obstacles
        ],
        "mru": {
            "antenna_height": sc.mru_height,
            "start": list(sc.q_start.as_tuple()),
            "goal": list(sc.q_goal.as_tuple()),
            "v_max": sc.v_max,
        },
        "radio": {
            "f_c_ghz": sc.radio.f_c_ghz,
            "p_max_dbm": sc.radio.p_max_dbm,
            "noise_dbm": sc.radio.noise_dbm,
            "rician_db": sc.radio.rician_db,
        },
        "multiuser": {"rs_target": sc.rs_target, "jensen_margin": sc.jensen_margin},
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        _validate_schema(data)
        room = data["room"]
        gridspec = data["grid"]
        irs = data["irs"]
        mru = data["mru"]
        radio = data["radio"]
        multi = data.get("multiuser", {})
        grid = make_grid(
            room["size_x"], room["size_y"],
            gridspec["delta_x"], gridspec["delta_y"], gridspec["epsilon"],
        )
        rp = RadioParams(
            f_c_ghz=radio["f_c_ghz"],
            p_max_dbm=radio["p_max_dbm"],
            noise_dbm=radio["noise_dbm"],
            rician_db=radio["rician_db"],
            n_sub_x=irs["sub_surfaces"]["nx"],
            n_sub_z=irs["sub_surfaces"]["nz"],
            elems_per_sub_x=irs["elements_per_sub"]["nx"],
            elems_per_sub_z=irs["elements_per_sub"]["nz"],
            element_spacing_wl=irs.get("element_spacing_wavelengths", 0.5),
        )
        return Scenario(
            room_x=room["size_x"],
            room_y=room["size_y"],
            room_height=room["height"],
            ap=Point3(*data["ap"]),
            irs_center=Point3(*irs["center"]),
            irs_normal=irs["normal"],
            sru=Point3(*data["sru"]),
            obstacles=tuple(
                Obstacle(ob["center"][0], ob["center"][1],
                         ob["size"][0], ob["size"][1], ob["height"])
                for ob in data["obstacles"]
            ),
            grid=grid,
            mru_height=mru["antenna_height"],
            q_start=Point3(*mru["start"]),
            q_goal=Point3(*mru["goal"]),
            v_max=mru["v_max"],
            radio=rp,
            rs_target=multi.get("rs_target", 1.0),
            jensen_margin=multi.get("jensen_margin", 0.0),
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc


def _validate_schema(data: dict) -> None:
    try:
        import jsonschema
    except ImportError:  # schema validation is best-effort plumbing
        return
    jsonschema.validate(data, _schema())


def _schema() -> dict:
    path = Path(__file__).resolve().parents[2] / "docs" / "scenario_schema.json"
    if path.exists():
        return json.loads(path.read_text())
    return {"type": "object"}  # installed without the repo checkout


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(sc: Scenario, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def scenario_hash(sc: Scenario) -> str:
    """Stable content hash used to tie exported artifacts to their scenario."""
    canonical = json.dumps(scenario_to_dict(sc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def paper_default_scenario(m_elements: int = 1200, phase_levels_note: None = None,
                           with_irs: bool = True, rs_target: float = 1.0) -> Scenario:
    """The 20 m x 20 m indoor-factory reference setup.

    The IRS keeps 10 sub-surface columns of 4x5-element blocks; the row count
    scales with the requested element total (must be a multiple of 200).
    """
    if with_irs:
        if m_elements % 200 != 0 or m_elements <= 0:
            raise ScenarioError("element count must be a positive multiple of 200")
        n_sub_z = m_elements // 200
        sub_kwargs = dict(n_sub_x=10, n_sub_z=n_sub_z,
                          elems_per_sub_x=4, elems_per_sub_z=5)
    else:
        sub_kwargs = dict(n_sub_x=0, n_sub_z=0, elems_per_sub_x=4, elems_per_sub_z=5)
    radio = RadioParams(
        f_c_ghz=2.0, p_max_dbm=20.0, noise_dbm=-90.0, rician_db=3.0,
        element_spacing_wl=0.5, **sub_kwargs,
    )
    return Scenario(
        room_x=20.0, room_y=20.0, room_height=5.0,
        ap=Point3(0.0, 10.0, 2.0),
        irs_center=Point3(0.0, -10.0, 2.0),
        irs_normal="+y",
        sru=Point3(0.0, 0.0, 1.3),
        obstacles=(
            Obstacle(-5.0, -5.0, 4.0, 4.0, 1.3),
            Obstacle(5.0, -5.0, 4.0, 4.0, 1.3),
            Obstacle(0.0, 0.0, 4.0, 4.0, 1.3),
            Obstacle(-3.0, 4.0, 4.0, 4.0, 1.3),
            Obstacle(3.0, 4.0, 4.0, 4.0, 1.3),
        ),
        grid=make_grid(20.0, 20.0, 0.5, 0.5, 0.025),
        mru_height=1.0,
        q_start=Point3(-10.0, 0.0, 1.0),
        q_goal=Point3(10.0, 0.0, 1.0),
        v_max=1.0,
        radio=radio,
        rs_target=rs_target,
    )


def desk_scenario(with_irs: bool = True, rs_target: float = 1.0) -> Scenario:
    """Reduced setup (8 sub-surfaces, 1 m grid) sized for CI-speed rate maps."""
    if with_irs:
        sub_kwargs = dict(n_sub_x=4, n_sub_z=2, elems_per_sub_x=2, elems_per_sub_z=2)
    else:
        sub_kwargs = dict(n_sub_x=0, n_sub_z=0, elems_per_sub_x=2, elems_per_sub_z=2)
    radio = RadioParams(
        f_c_ghz=2.0, p_max_dbm=20.0, noise_dbm=-90.0, rician_db=3.0,
        element_spacing_wl=0.5, **sub_kwargs,
    )
    return Scenario(
        room_x=20.0, room_y=20.0, room_height=5.0,
        ap=Point3(0.0, 10.0, 2.0),
        irs_center=Point3(0.0, -10.0, 2.0),
        irs_normal="+y",
        sru=Point3(0.0, 0.0, 1.3),
        obstacles=(
            Obstacle(-5.0, -5.0, 4.0, 4.0, 1.3),
            Obstacle(5.0, -5.0, 4.0, 4.0, 1.3),
            Obstacle(0.0, 0.0, 4.0, 4.0, 1.3),
            Obstacle(-3.0, 4.0, 4.0, 4.0, 1.3),
            Obstacle(3.0, 4.0, 4.0, 4.0, 1.3),
        ),
        grid=make_grid(20.0, 20.0, 1.0, 1.0, 0.05),
        mru_height=1.0,
        q_start=Point3(-10.0, 0.0, 1.0),
        q_goal=Point3(10.0, 0.0, 1.0),
        v_max=1.0,
        radio=radio,
        rs_target=rs_target,
    )


def toy_scenario(n_sub: int = 2, grid_cells: int = 6, obstacles: bool = True,
                 rs_target: float = 0.5) -> Scenario:
    """Miniature room for unit tests: small IRS, coarse grid."""
    radio = RadioParams(
        f_c_ghz=2.0, p_max_dbm=20.0, noise_dbm=-90.0, rician_db=3.0,
        n_sub_x=n_sub, n_sub_z=1 if n_sub else 0,
        elems_per_sub_x=2, elems_per_sub_z=1,
    )
    extent = float(grid_cells)  # 1 m cells
    obs = (Obstacle(0.0, 0.0, 1.0, 1.0, 1.2),) if obstacles else ()
    return Scenario(
        room_x=extent, room_y=extent, room_height=3.0,
        ap=Point3(0.0, extent / 2.0, 2.0),
        irs_center=Point3(0.0, -extent / 2.0, 2.0),
        irs_normal="+y",
        sru=Point3(1.0, 1.0, 1.4),
        obstacles=obs,
        grid=make_grid(extent, extent, 1.0, 1.0, 1.0 / grid_cells + 1e-9),
        mru_height=1.0,
        q_start=Point3(-extent / 2.0 + 0.5, 0.5, 1.0),
        q_goal=Point3(extent / 2.0 - 0.5, 0.5, 1.0),
        v_max=1.0,
        radio=radio,
        rs_target=rs_target,
    )
