"""Deterministic discrete-time world model.

Robots live in lane coordinates: ``s`` is the longitudinal position along the
lane's travel direction, ``lateral`` the offset from the lane centerline
measured on the world's perpendicular axis. Lane changes interpolate the
lateral offset linearly over a fixed number of control steps; there are no
heading dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import (
    CROSS_INTERSECTION,
    PARALLEL_MERGE,
    LaneGeometry,
    LaneSpec,
    ScenarioConfig,
    ScenarioError,
)

RUNNING = "running"
COLLIDED = "collided"
DONE = "done"

_EPS_DIST = 1e-9


class WorldError(RuntimeError):
    """Contract violation while driving the world (bad command set, step after
    terminal status, unknown robot)."""


@dataclass
class RobotState:
    id: int
    kind: str
    lane: int
    s: float
    lateral: float
    v: float
    lane_flag: int
    radius: float
    lane_change: float | None = None  # maneuver progress in [0, 1], None when idle


@dataclass
class MotionCommand:
    accel: float = 0.0
    lane_change_request: bool = False


@dataclass(frozen=True)
class CollisionEvent:
    robot_a: int
    robot_b: int
    t: int


@dataclass
class WorldState:
    robots: list[RobotState]
    geometry: LaneGeometry
    cfg: ScenarioConfig
    t: int
    dt: float
    substep: float
    status: str
    rng: np.random.Generator
    collisions: list[CollisionEvent] = field(default_factory=list)

    def robot(self, robot_id: int) -> RobotState:
        for r in self.robots:
            if r.id == robot_id:
                return r
        raise WorldError(f"unknown robot id {robot_id}")


def lane_start(lane: LaneSpec, topology: str) -> float:
    """World coordinate (along the lane axis) where s = 0 sits."""
    if topology == CROSS_INTERSECTION:
        half = lane.length / 2.0
        return -half if lane.axis[0] == "+" else half
    return 0.0 if lane.axis[0] == "+" else lane.length


def world_position(world: WorldState, robot: RobotState) -> tuple[float, float]:
    lane = world.geometry.lane(robot.lane)
    start = lane_start(lane, world.geometry.topology)
    along = start + robot.s if lane.axis[0] == "+" else start - robot.s
    across = lane.center + robot.lateral
    if lane.axis[1] == "x":
        return (along, across)
    return (across, along)


def heading(world: WorldState, robot: RobotState) -> float:
    axis = world.geometry.lane(robot.lane).axis
    return {"+x": 0.0, "-x": math.pi, "+y": math.pi / 2.0, "-y": -math.pi / 2.0}[axis]


def arena_bounds(geometry: LaneGeometry) -> tuple[float, float, float, float]:
    """Bounding box (x0, y0, x1, y1) of all lane rectangles; its edges act as
    lidar-visible walls."""
    xs: list[float] = []
    ys: list[float] = []
    for lane in geometry.lanes:
        start = lane_start(lane, geometry.topology)
        end = start + lane.length if lane.axis[0] == "+" else start - lane.length
        lo, hi = min(start, end), max(start, end)
        half = lane.width / 2.0
        if lane.axis[1] == "x":
            xs += [lo, hi]
            ys += [lane.center - half, lane.center + half]
        else:
            ys += [lo, hi]
            xs += [lane.center - half, lane.center + half]
    return (min(xs), min(ys), max(xs), max(ys))


def conflict_zone_far_edge_s(geometry: LaneGeometry, lane_id: int) -> float:
    """Longitudinal coordinate, in the lane's own frame, of the far edge of the
    central conflict-zone square (cross topology only)."""
    if geometry.topology != CROSS_INTERSECTION:
        raise ScenarioError("conflict zone is only defined for cross_intersection")
    lane = geometry.lane(lane_id)
    half = geometry.conflict_zone / 2.0
    start = lane_start(lane, geometry.topology)
    return half - start if lane.axis[0] == "+" else start + half


def load_scenario(config: ScenarioConfig, seed: int) -> WorldState:
    """Instantiate a world at t = 0 with robots placed inside their configured
    ranges; deterministic given the seed."""
    config.validate()
    rng = np.random.default_rng(seed)
    robots = []
    for spec in config.robots:
        lo, hi = spec.s_range
        s = lo if lo == hi else float(rng.uniform(lo, hi))
        robots.append(
            RobotState(
                id=spec.id,
                kind=spec.kind,
                lane=spec.lane,
                s=s,
                lateral=0.0,
                v=0.0 if spec.kind == "static" else spec.v0,
                lane_flag=spec.lane,
                radius=spec.radius,
            )
        )
    world = WorldState(
        robots=robots,
        geometry=config.geometry,
        cfg=config,
        t=0,
        dt=config.dt,
        substep=config.substep,
        status=RUNNING,
        rng=rng,
    )
    if detect_collisions(world):
        raise ScenarioError("initial placement is not collision-free")
    return world


def detect_collisions(world: WorldState) -> list[CollisionEvent]:
    """All robot pairs whose center distance is below the sum of radii, each
    pair once with ordered ids."""
    events = []
    robots = sorted(world.robots, key=lambda r: r.id)
    pos = {r.id: world_position(world, r) for r in robots}
    for i, ra in enumerate(robots):
        xa, ya = pos[ra.id]
        for rb in robots[i + 1 :]:
            xb, yb = pos[rb.id]
            if math.hypot(xb - xa, yb - ya) < ra.radius + rb.radius:
                events.append(CollisionEvent(ra.id, rb.id, world.t))
    return events


def _ray_circle(ox: float, oy: float, dx: float, dy: float, cx: float, cy: float, r: float) -> float | None:
    """Distance along the unit ray to the circle, None on miss."""
    fx, fy = cx - ox, cy - oy
    b = fx * dx + fy * dy
    disc = b * b - (fx * fx + fy * fy - r * r)
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    t1 = b - root
    if t1 > _EPS_DIST:
        return t1
    if b + root > _EPS_DIST:  # origin inside or touching the circle
        return _EPS_DIST
    return None


def _ray_box_exit(ox: float, oy: float, dx: float, dy: float, box: tuple[float, float, float, float]) -> float | None:
    """Distance to the arena wall for a ray starting inside the box."""
    x0, y0, x1, y1 = box
    if not (x0 <= ox <= x1 and y0 <= oy <= y1):
        return None
    best = math.inf
    if dx > _EPS_DIST:
        best = min(best, (x1 - ox) / dx)
    elif dx < -_EPS_DIST:
        best = min(best, (x0 - ox) / dx)
    if dy > _EPS_DIST:
        best = min(best, (y1 - oy) / dy)
    elif dy < -_EPS_DIST:
        best = min(best, (y0 - oy) / dy)
    return None if math.isinf(best) else max(best, _EPS_DIST)


def raycast_lidar(world: WorldState, robot_id: int, beams: int, r_max: float) -> np.ndarray:
    """K beam distances at angles ``heading + 2*pi*k/K``, clipped to r_max."""
    robot = world.robot(robot_id)
    if beams < 1:
        raise WorldError("need at least one beam")
    ox, oy = world_position(world, robot)
    base = heading(world, robot)
    box = arena_bounds(world.geometry)
    others = [(world_position(world, r), r.radius) for r in world.robots if r.id != robot_id]
    out = np.empty(beams, dtype=np.float64)
    for k in range(beams):
        ang = base + 2.0 * math.pi * k / beams
        dx, dy = math.cos(ang), math.sin(ang)
        d = r_max
        wall = _ray_box_exit(ox, oy, dx, dy, box)
        if wall is not None and wall < d:
            d = wall
        for (cx, cy), rad in others:
            hit = _ray_circle(ox, oy, dx, dy, cx, cy, rad)
            if hit is not None and hit < d:
                d = hit
        out[k] = max(min(d, r_max), _EPS_DIST)
    return out


def _advance_lane_change(world: WorldState, robot: RobotState) -> None:
    source = world.geometry.lane(robot.lane)
    target_id = world.geometry.neighbors.get(robot.lane)
    if target_id is None:  # cannot happen for a legally started maneuver
        robot.lane_change = None
        return
    target = world.geometry.lane(target_id)
    steps = world.cfg.lane_change_steps
    k = int(round((robot.lane_change or 0.0) * steps)) + 1
    if k >= steps:
        robot.lane = target_id
        robot.lane_flag = target_id
        robot.lateral = 0.0
        robot.lane_change = None
    else:
        robot.lane_change = k / steps
        robot.lateral = (k / steps) * (target.center - source.center)


def step_world(world: WorldState, commands: dict[int, MotionCommand]) -> tuple[WorldState, list[CollisionEvent]]:
    """Advance one control step: integrate kinematics over substeps, advance
    lane-change maneuvers, detect collisions, update episode status."""
    if world.status != RUNNING:
        raise WorldError(f"step_world called on terminal world (status={world.status})")
    movable = {r.id for r in world.robots if r.kind != "static"}
    given = set(commands)
    if given - movable:
        raise WorldError(f"commands for static robots: {sorted(given - movable)}")
    if movable - given:
        raise WorldError(f"missing commands for robots: {sorted(movable - given)}")

    cfg = world.cfg
    n_sub = int(round(world.dt / world.substep))
    for robot in world.robots:
        if robot.kind == "static":
            continue
        cmd = commands[robot.id]
        accel = max(-cfg.accel_cap, min(cfg.accel_cap, cmd.accel))
        if (
            cmd.lane_change_request
            and robot.lane_change is None
            and world.geometry.neighbors.get(robot.lane) is not None
        ):
            robot.lane_change = 0.0
        for _ in range(n_sub):
            robot.v = max(0.0, min(cfg.v_max, robot.v + accel * world.substep))
            robot.s += robot.v * world.substep
        if robot.lane_change is not None:
            _advance_lane_change(world, robot)

    world.t += 1
    events = detect_collisions(world)
    if events:
        world.collisions.extend(events)
        world.status = COLLIDED
    elif world.t >= cfg.episode_length:
        world.status = DONE
    return world, events


def robot_collided(world: WorldState, robot_id: int) -> bool:
    return any(robot_id in (e.robot_a, e.robot_b) for e in world.collisions)


def check_success(world: WorldState, robot_id: int) -> bool:
    """Scenario-specific success predicate; collisions always preclude
    success and static robots never succeed."""
    robot = world.robot(robot_id)
    if robot.kind == "static":
        return False
    if robot_collided(world, robot_id):
        return False
    if world.geometry.topology == CROSS_INTERSECTION:
        return robot.s > conflict_zone_far_edge_s(world.geometry, robot.lane)
    cfg = world.cfg
    if cfg.merging_robot is not None and robot_id == cfg.merging_robot:
        if cfg.target_lane is None or robot.lane_flag != cfg.target_lane:
            return False
        statics = [r.s for r in world.robots if r.kind == "static"]
        return robot.s > max(statics) if statics else True
    return True  # non-merging robot: surviving without collision counts


def world_to_dict(world: WorldState, include_rng: bool = True) -> dict:
    """Plain-data snapshot, used for determinism checks and the bridge."""
    doc = {
        "t": world.t,
        "status": world.status,
        "robots": [
            {
                "id": r.id,
                "kind": r.kind,
                "lane": r.lane,
                "s": r.s,
                "lateral": r.lateral,
                "v": r.v,
                "lane_flag": r.lane_flag,
                "lane_change": r.lane_change,
                "radius": r.radius,
            }
            for r in sorted(world.robots, key=lambda r: r.id)
        ],
        "collisions": [(e.robot_a, e.robot_b, e.t) for e in world.collisions],
    }
    if include_rng:
        state = world.rng.bit_generator.state
        doc["rng"] = {
            "bit_generator": state["bit_generator"],
            "state": int(state["state"]["state"]),
            "inc": int(state["state"]["inc"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }
    return doc
