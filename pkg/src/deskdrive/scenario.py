"""Scenario configuration: lane layouts, robot rosters, reward and sensing
parameters.

Scenario configs are plain JSON documents; the two shipped files live in
``deskdrive/scenarios/``. Every field in the JSON maps one-to-one onto
:class:`ScenarioConfig`.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

PARALLEL_MERGE = "parallel_merge"
CROSS_INTERSECTION = "cross_intersection"

AXES = ("+x", "-x", "+y", "-y")


class ScenarioError(ValueError):
    """Invalid scenario name, geometry, roster, or override."""


@dataclass
class LaneSpec:
    """One straight lane segment. ``axis`` carries the travel direction."""

    id: int
    axis: str
    center: float  # lateral offset of the lane centerline (m)
    length: float
    width: float


@dataclass
class LaneGeometry:
    lanes: list[LaneSpec]
    topology: str
    neighbors: dict[int, int | None]  # lane id -> left-neighbor lane id
    conflict_zone: float = 0.0  # side length of the central square (m)

    def lane(self, lane_id: int) -> LaneSpec:
        for ln in self.lanes:
            if ln.id == lane_id:
                return ln
        raise ScenarioError(f"unknown lane id {lane_id}")

    def validate(self) -> None:
        ids = [ln.id for ln in self.lanes]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate lane ids")
        for ln in self.lanes:
            if ln.width <= 0 or ln.length <= 0:
                raise ScenarioError(f"lane {ln.id}: width and length must be > 0")
            if ln.axis not in AXES:
                raise ScenarioError(f"lane {ln.id}: bad axis {ln.axis!r}")
        for src, dst in self.neighbors.items():
            if src not in ids:
                raise ScenarioError(f"neighbor table references unknown lane {src}")
            if dst is not None and dst not in ids:
                raise ScenarioError(f"neighbor of lane {src} is unknown lane {dst}")
            if dst == src:
                raise ScenarioError(f"lane {src} cannot neighbor itself")
        if self.topology == CROSS_INTERSECTION:
            axes = {ln.axis[1] for ln in self.lanes}
            if axes != {"x", "y"}:
                raise ScenarioError("cross_intersection needs lanes on both axes")
            if self.conflict_zone <= 0:
                raise ScenarioError("cross_intersection needs a conflict_zone > 0")
        elif self.topology != PARALLEL_MERGE:
            raise ScenarioError(f"unknown topology {self.topology!r}")


@dataclass
class RobotSpec:
    id: int
    kind: str  # learner | social | static
    lane: int
    s_range: tuple[float, float]  # initial longitudinal position range (m)
    v0: float
    radius: float = 0.08


@dataclass
class RandomizationConfig:
    """Dynamic randomization knobs applied at reset / per step."""

    position_jitter: dict[int, float] = field(default_factory=dict)  # robot id -> +-j (m)
    sensor_noise_std: float = 0.0
    speed_noise_std: float = 0.0
    social_replacement_prob: float = 0.0

    def validate(self) -> None:
        if self.sensor_noise_std < 0 or self.speed_noise_std < 0:
            raise ScenarioError("noise stds must be >= 0")
        if not 0.0 <= self.social_replacement_prob <= 1.0:
            raise ScenarioError("social_replacement_prob must be in [0, 1]")
        for rid, j in self.position_jitter.items():
            if j < 0:
                raise ScenarioError(f"position jitter for robot {rid} must be >= 0")


@dataclass
class IDMParams:
    """Parameters of the rule-based car-following driver.

    ``mu``/``sigma`` describe the Gaussian perceived-gap offset used by the
    perception-uncertainty variant; ``sigma = 0`` recovers the classic model.
    """

    v_f: float = 0.26  # desired free-flow speed (m/s)
    a: float = 0.1  # maximum acceleration (m/s^2)
    b: float = 0.1  # comfortable deceleration (m/s^2)
    S_0: float = 0.1  # minimum safe gap (m)
    headway: float = 1.0  # reaction/headway time (s)
    mu: float = 0.0
    sigma: float = 0.02

    def validate(self) -> None:
        if self.v_f <= 0 or self.a <= 0 or self.b <= 0:
            raise ScenarioError("IDM v_f, a, b must be > 0")
        if self.S_0 < 0 or self.headway < 0 or self.sigma < 0:
            raise ScenarioError("IDM S_0, headway, sigma must be >= 0")


@dataclass
class ScenarioConfig:
    name: str
    geometry: LaneGeometry
    robots: list[RobotSpec]
    episode_length: int
    dt: float = 0.5
    substep: float = 0.05
    v_max: float = 0.26
    accel_cap: float = 0.5
    dv_step: float = 0.05  # speed-change step per slow_down/speed_up action (m/s)
    lane_change_steps: int = 4
    alpha: float = 0.5  # collision weight in the per-robot reward
    collision_penalty: float = 1.0
    lidar_beams: int = 24
    lidar_r_max: float = 3.5
    randomization: RandomizationConfig = field(default_factory=RandomizationConfig)
    social_agent: IDMParams = field(default_factory=IDMParams)
    merging_robot: int | None = None  # lane_change success bookkeeping
    target_lane: int | None = None

    def learner_ids(self) -> list[int]:
        return sorted(r.id for r in self.robots if r.kind == "learner")

    def robot(self, robot_id: int) -> RobotSpec:
        for r in self.robots:
            if r.id == robot_id:
                return r
        raise ScenarioError(f"unknown robot id {robot_id}")

    def success_eligible_ids(self) -> list[int]:
        """Robots that count toward the success-rate denominator."""
        if self.name == "lane_change" and self.merging_robot is not None:
            return [self.merging_robot]
        return self.learner_ids()

    def validate(self) -> None:
        self.geometry.validate()
        if self.episode_length < 1:
            raise ScenarioError("episode_length must be >= 1")
        if self.dt <= 0 or self.substep <= 0:
            raise ScenarioError("dt and substep must be > 0")
        n_sub = self.dt / self.substep
        if abs(n_sub - round(n_sub)) > 1e-9:
            raise ScenarioError("substep must divide dt exactly")
        if self.v_max <= 0 or self.accel_cap <= 0 or self.dv_step <= 0:
            raise ScenarioError("v_max, accel_cap, dv_step must be > 0")
        if self.lane_change_steps < 1:
            raise ScenarioError("lane_change_steps must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ScenarioError("alpha must be in [0, 1]")
        if self.lidar_beams < 1:
            raise ScenarioError("lidar_beams must be >= 1")
        if self.lidar_r_max <= 0:
            raise ScenarioError("lidar_r_max must be > 0")
        ids = [r.id for r in self.robots]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate robot ids")
        lane_ids = {ln.id for ln in self.geometry.lanes}
        for r in self.robots:
            if r.lane not in lane_ids:
                raise ScenarioError(f"robot {r.id} assigned to nonexistent lane {r.lane}")
            if r.kind not in ("learner", "social", "static"):
                raise ScenarioError(f"robot {r.id}: bad kind {r.kind!r}")
            lo, hi = r.s_range
            if hi < lo:
                raise ScenarioError(f"robot {r.id}: empty s_range")
            if r.radius <= 0:
                raise ScenarioError(f"robot {r.id}: radius must be > 0")
            if r.v0 < 0 or r.v0 > self.v_max:
                raise ScenarioError(f"robot {r.id}: v0 outside [0, v_max]")
            if r.kind == "static" and r.v0 != 0.0:
                raise ScenarioError(f"static robot {r.id} must have v0 = 0")
        self.randomization.validate()
        self.social_agent.validate()
        self._check_ranges_collision_free()
        if self.merging_robot is not None and self.merging_robot not in ids:
            raise ScenarioError("merging_robot is not in the roster")
        if self.target_lane is not None and self.target_lane not in lane_ids:
            raise ScenarioError("target_lane is not a lane")

    def _check_ranges_collision_free(self) -> None:
        # Conservative same-lane check: worst-case placement inside
        # s_range +- jitter must keep centers farther apart than summed radii.
        for i, ra in enumerate(self.robots):
            for rb in self.robots[i + 1 :]:
                if ra.lane != rb.lane:
                    continue
                ja = self.randomization.position_jitter.get(ra.id, 0.0)
                jb = self.randomization.position_jitter.get(rb.id, 0.0)
                a_lo, a_hi = ra.s_range[0] - ja, ra.s_range[1] + ja
                b_lo, b_hi = rb.s_range[0] - jb, rb.s_range[1] + jb
                gap = max(b_lo - a_hi, a_lo - b_hi)
                if gap <= ra.radius + rb.radius:
                    raise ScenarioError(
                        f"robots {ra.id} and {rb.id} can overlap for some sample "
                        f"in their initial ranges"
                    )


def _geometry_from_dict(d: dict) -> LaneGeometry:
    lanes = [
        LaneSpec(
            id=int(ln["id"]),
            axis=str(ln["axis"]),
            center=float(ln["center"]),
            length=float(ln.get("length", d.get("lane_length", 2.6))),
            width=float(ln.get("width", d.get("lane_width", 0.25))),
        )
        for ln in d["lanes"]
    ]
    neighbors = {int(k): (None if v is None else int(v)) for k, v in d.get("neighbors", {}).items()}
    for ln in lanes:
        neighbors.setdefault(ln.id, None)
    return LaneGeometry(
        lanes=lanes,
        topology=str(d["topology"]),
        neighbors=neighbors,
        conflict_zone=float(d.get("conflict_zone", 0.0)),
    )


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a parsed JSON document."""
    try:
        geometry = _geometry_from_dict(doc["geometry"])
        robots = [
            RobotSpec(
                id=int(r["id"]),
                kind=str(r["kind"]),
                lane=int(r["lane"]),
                s_range=(float(r["s_range"][0]), float(r["s_range"][1])),
                v0=float(r["v0"]),
                radius=float(r.get("radius", 0.08)),
            )
            for r in doc["robots"]
        ]
        rnd = doc.get("randomization", {})
        randomization = RandomizationConfig(
            position_jitter={int(k): float(v) for k, v in rnd.get("position_jitter", {}).items()},
            sensor_noise_std=float(rnd.get("sensor_noise_std", 0.0)),
            speed_noise_std=float(rnd.get("speed_noise_std", 0.0)),
            social_replacement_prob=float(rnd.get("social_replacement_prob", 0.0)),
        )
        soc = doc.get("social_agent", {})
        social = IDMParams(
            v_f=float(soc.get("v_f", 0.26)),
            a=float(soc.get("a", 0.1)),
            b=float(soc.get("b", 0.1)),
            S_0=float(soc.get("S_0", 0.1)),
            headway=float(soc.get("headway", 1.0)),
            mu=float(soc.get("mu", 0.0)),
            sigma=float(soc.get("sigma", 0.02)),
        )
        reward = doc.get("reward", {})
        success = doc.get("success", {})
        cfg = ScenarioConfig(
            name=str(doc["name"]),
            geometry=geometry,
            robots=robots,
            episode_length=int(doc["episode_length"]),
            dt=float(doc.get("dt", 0.5)),
            substep=float(doc.get("substep", 0.05)),
            v_max=float(doc.get("v_max", 0.26)),
            accel_cap=float(doc.get("accel_cap", 0.5)),
            dv_step=float(doc.get("dv_step", 0.05)),
            lane_change_steps=int(doc.get("lane_change_steps", 4)),
            alpha=float(reward.get("alpha", 0.5)),
            collision_penalty=float(reward.get("collision_penalty", 1.0)),
            lidar_beams=int(doc.get("lidar", {}).get("beams", 24)),
            lidar_r_max=float(doc.get("lidar", {}).get("r_max", 3.5)),
            randomization=randomization,
            social_agent=social,
            merging_robot=(None if success.get("merging_robot") is None else int(success["merging_robot"])),
            target_lane=(None if success.get("target_lane") is None else int(success["target_lane"])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    cfg.validate()
    return cfg


def list_scenarios() -> list[str]:
    """Names of the shipped scenario files."""
    pkg = resources.files("deskdrive") / "scenarios"
    return sorted(p.name[: -len(".json")] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_scenario_doc(name: str) -> dict:
    pkg = resources.files("deskdrive") / "scenarios" / f"{name}.json"
    if not pkg.is_file():
        raise ScenarioError(f"unknown scenario {name!r}; available: {list_scenarios()}")
    return json.loads(pkg.read_text())


def apply_overrides(doc: dict, overrides: dict[str, object]) -> dict:
    """Apply dotted-path overrides (e.g. ``reward.alpha = 0.7``) to a scenario
    document, returning a new document."""
    out = copy.deepcopy(doc)
    for path, value in overrides.items():
        parts = path.split(".")
        node = out
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise ScenarioError(f"override path {path!r} does not exist")
            node = node[p]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ScenarioError(f"override path {path!r} does not exist")
        node[parts[-1]] = value
    return out


def load_config(name: str, overrides: dict[str, object] | None = None) -> ScenarioConfig:
    doc = load_scenario_doc(name)
    if overrides:
        doc = apply_overrides(doc, overrides)
    return config_from_dict(doc)
