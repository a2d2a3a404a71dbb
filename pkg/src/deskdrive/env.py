"""Robot-environment interface: make/reset/step lifecycle, state/action/reward
adapters, and dynamic randomization.

Each learner robot observes a flat vector ``[K lidar distances, speed,
lane flag]`` and picks one of four discrete actions. Rewards combine a
collision penalty with normalized forward progress; a scalar team reward (the
learner mean) is always reported alongside the per-robot values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scenario as sc
from .scenario import RandomizationConfig, ScenarioConfig, ScenarioError
from .social import social_policy
from .world import (
    RUNNING,
    MotionCommand,
    WorldState,
    check_success,
    load_scenario,
    raycast_lidar,
    step_world,
)

SLOW_DOWN, KEEP_LANE, SPEED_UP, LEFT_CHANGE = 0, 1, 2, 3
N_ACTIONS = 4
ACTION_NAMES = ("slow_down", "keep_lane", "speed_up", "left_change")
LIDAR_CLIP_MIN = 0.001


class EnvError(RuntimeError):
    """Lifecycle misuse: step before reset, step after done, wrong arity."""


@dataclass
class RewardRecord:
    r_travel: dict[int, float]
    r_col: dict[int, float]
    r_total: dict[int, float]
    team_reward: float


def one_hot(action: int, n: int = N_ACTIONS) -> np.ndarray:
    if not 0 <= action < n:
        raise EnvError(f"action index {action} out of range")
    v = np.zeros(n, dtype=np.float64)
    v[action] = 1.0
    return v


def state_adapter(
    lidar: np.ndarray, speed: float, lane_flag: int, r_max: float, beams: int | None = None
) -> np.ndarray:
    """Concatenate [lidar, speed, lane_flag] into the fixed observation layout,
    clipping lidar entries into (LIDAR_CLIP_MIN, r_max]."""
    lidar = np.asarray(lidar, dtype=np.float64)
    if lidar.ndim != 1:
        raise EnvError("lidar must be a flat vector")
    if beams is not None and lidar.shape[0] != beams:
        raise EnvError(f"lidar length {lidar.shape[0]} != configured beam count {beams}")
    clipped = np.clip(lidar, LIDAR_CLIP_MIN, r_max)
    return np.concatenate([clipped, [float(speed), float(lane_flag)]])


def action_adapter(action: int, dv_step: float, dt: float) -> MotionCommand:
    """Map a discrete action index onto a motion command."""
    if action == SLOW_DOWN:
        return MotionCommand(accel=-dv_step / dt)
    if action == KEEP_LANE:
        return MotionCommand(accel=0.0)
    if action == SPEED_UP:
        return MotionCommand(accel=dv_step / dt)
    if action == LEFT_CHANGE:
        return MotionCommand(accel=0.0, lane_change_request=True)
    raise EnvError(f"action index {action} out of range")


def reward_adapter(
    collided_ids: set[int],
    progress: dict[int, float],
    alpha: float,
    v_max: float,
    dt: float,
    collision_penalty: float = 1.0,
) -> RewardRecord:
    """Per-robot reward alpha*r_col + (1-alpha)*r_travel with r_travel the
    forward progress normalized by the per-step maximum v_max*dt."""
    r_travel = {}
    r_col = {}
    r_total = {}
    norm = v_max * dt
    for rid, dist in progress.items():
        rt = min(max(dist / norm, 0.0), 1.0)
        rc = -collision_penalty if rid in collided_ids else 0.0
        r_travel[rid] = rt
        r_col[rid] = rc
        r_total[rid] = alpha * rc + (1.0 - alpha) * rt
    team = sum(r_total.values()) / len(r_total) if r_total else 0.0
    return RewardRecord(r_travel=r_travel, r_col=r_col, r_total=r_total, team_reward=team)


def apply_randomization(
    world: WorldState, rc: RandomizationConfig, rng: np.random.Generator, max_retries: int = 100
) -> tuple[WorldState, int | None]:
    """Jitter initial positions within the configured per-robot ranges
    (re-sampled until collision-free), and with the configured probability
    pick one learner to be socially driven for the episode.

    Sensor/speed noise is drawn per step by the Env from the same stream, so
    an all-zero config leaves both the world and the stream untouched.
    """
    from .world import detect_collisions  # local import to avoid cycle noise

    jittered = [r for r in world.robots if rc.position_jitter.get(r.id, 0.0) > 0.0]
    if jittered:
        base = {r.id: r.s for r in jittered}
        for _ in range(max_retries):
            for r in jittered:
                j = rc.position_jitter[r.id]
                r.s = base[r.id] + float(rng.uniform(-j, j))
            if not detect_collisions(world):
                break
        else:
            raise ScenarioError("could not place robots collision-free within retry budget")

    replaced = None
    if rc.social_replacement_prob > 0.0:
        if float(rng.random()) < rc.social_replacement_prob:
            learners = sorted(r.id for r in world.robots if r.kind == "learner")
            if learners:
                replaced = learners[int(rng.integers(0, len(learners)))]
                world.robot(replaced).kind = "social"  # for this episode only
    return world, replaced


class Env:
    """One scenario instance; ``reset`` before the first ``step``."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.learner_ids = cfg.learner_ids()
        self.world: WorldState | None = None
        self.replaced_robot: int | None = None
        self._done = True  # requires reset before step

    @property
    def n_learners(self) -> int:
        return len(self.learner_ids)

    @property
    def obs_len(self) -> int:
        return self.cfg.lidar_beams + 2

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    @property
    def episode_length(self) -> int:
        return self.cfg.episode_length

    def reset(self, seed: int | None = None) -> list[np.ndarray]:
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2**63))
        world = load_scenario(self.cfg, seed)
        world, self.replaced_robot = apply_randomization(world, self.cfg.randomization, world.rng)
        self.world = world
        self._done = False
        return [self._observe(rid) for rid in self.learner_ids]

    def _observe(self, robot_id: int) -> np.ndarray:
        assert self.world is not None
        cfg = self.cfg
        robot = self.world.robot(robot_id)
        lidar = raycast_lidar(self.world, robot_id, cfg.lidar_beams, cfg.lidar_r_max)
        speed = robot.v
        rnd = cfg.randomization
        if rnd.sensor_noise_std > 0.0:
            lidar = lidar + self.world.rng.normal(0.0, rnd.sensor_noise_std, cfg.lidar_beams)
        if rnd.speed_noise_std > 0.0:
            speed = float(np.clip(speed + self.world.rng.normal(0.0, rnd.speed_noise_std), 0.0, cfg.v_max))
        return state_adapter(lidar, speed, robot.lane_flag, cfg.lidar_r_max, cfg.lidar_beams)

    def step(self, actions: list[int]) -> tuple[list[np.ndarray], RewardRecord, list[bool], dict]:
        if self.world is None:
            raise EnvError("step called before reset")
        if self._done:
            raise EnvError("step called after episode end; reset first")
        if len(actions) != self.n_learners:
            raise EnvError(f"expected {self.n_learners} actions, got {len(actions)}")
        cfg = self.cfg
        world = self.world

        commands: dict[int, MotionCommand] = {}
        for rid, action in zip(self.learner_ids, actions):
            if rid == self.replaced_robot:
                continue  # socially driven this episode; the action is ignored
            commands[rid] = action_adapter(int(action), cfg.dv_step, cfg.dt)
        for robot in sorted(world.robots, key=lambda r: r.id):
            if robot.kind == "social":
                commands[robot.id] = social_policy(world, robot.id, cfg.social_agent, world.rng)

        before = {rid: world.robot(rid).s for rid in self.learner_ids}
        _, events = step_world(world, commands)
        progress = {rid: world.robot(rid).s - before[rid] for rid in self.learner_ids}

        collided_ids = {rid for e in events for rid in (e.robot_a, e.robot_b)}
        rewards = reward_adapter(
            collided_ids, progress, cfg.alpha, cfg.v_max, cfg.dt, cfg.collision_penalty
        )
        obs = [self._observe(rid) for rid in self.learner_ids]
        terminal = world.status != RUNNING
        self._done = terminal
        info = {
            "t": world.t,
            "status": world.status,
            "collisions": [(e.robot_a, e.robot_b) for e in events],
            "success": {rid: check_success(world, rid) for rid in self.learner_ids},
            "speeds": {rid: world.robot(rid).v for rid in self.learner_ids},
            "replaced_robot": self.replaced_robot,
        }
        return obs, rewards, [terminal] * self.n_learners, info


def make(scenario_name: str, overrides: dict[str, object] | None = None) -> Env:
    """Create an environment for a shipped scenario; raises ScenarioError for
    unknown names or invalid overrides."""
    cfg = sc.load_config(scenario_name, overrides)
    return Env(cfg)
