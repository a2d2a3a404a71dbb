"""Simulation-world contracts: placement, kinematics, lane changes, collision
detection against a brute-force oracle, lidar geometry, success predicates."""

import math

import numpy as np
import pytest

from deskdrive.scenario import ScenarioError, config_from_dict, load_config
from deskdrive.world import (
    COLLIDED,
    DONE,
    RUNNING,
    MotionCommand,
    WorldError,
    arena_bounds,
    check_success,
    conflict_zone_far_edge_s,
    detect_collisions,
    lane_start,
    load_scenario,
    raycast_lidar,
    step_world,
    world_position,
    world_to_dict,
)


def make_config(**kwargs):
    """Small single-lane (or parametrized) scenario for direct world tests."""
    doc = {
        "name": "lane_change",
        "geometry": {
            "topology": "parallel_merge",
            "lane_length": 20.0,
            "lane_width": 0.25,
            "lanes": [
                {"id": 0, "axis": "+x", "center": 0.0},
                {"id": 1, "axis": "+x", "center": 0.25},
            ],
            "neighbors": {"0": 1, "1": None},
        },
        "robots": [
            {"id": 1, "kind": "learner", "lane": 0, "s_range": [1.0, 1.0], "v0": 0.2, "radius": 0.08},
        ],
        "episode_length": 50,
        "dt": 0.5,
        "substep": 0.05,
        "v_max": 0.26,
        "success": {"merging_robot": 1, "target_lane": 1},
    }
    doc.update(kwargs)
    return config_from_dict(doc)


def keep(world):
    return {r.id: MotionCommand() for r in world.robots if r.kind != "static"}


class TestLoadScenario:
    def test_lane_change_roster(self):
        cfg = load_config("lane_change")
        world = load_scenario(cfg, seed=42)
        assert len(world.robots) == 3
        static = world.robot(3)
        assert static.kind == "static"
        assert static.v == 0.0
        assert world.t == 0 and world.status == RUNNING

    def test_cross_roster_one_per_arm(self):
        cfg = load_config("cross_intersection")
        world = load_scenario(cfg, seed=7)
        assert len(world.robots) == 4
        assert sorted(r.lane for r in world.robots) == [0, 1, 2, 3]

    def test_same_seed_bit_identical(self):
        cfg = load_config("lane_change")
        w1 = load_scenario(cfg, seed=9)
        w2 = load_scenario(cfg, seed=9)
        assert world_to_dict(w1) == world_to_dict(w2)

    def test_unknown_scenario(self):
        with pytest.raises(ScenarioError):
            load_config("does_not_exist")

    def test_robot_on_missing_lane(self):
        with pytest.raises(ScenarioError):
            make_config(
                robots=[{"id": 1, "kind": "learner", "lane": 9, "s_range": [0, 0], "v0": 0.1}]
            )

    def test_sampled_within_range(self):
        cfg = make_config(
            robots=[{"id": 1, "kind": "learner", "lane": 0, "s_range": [1.0, 2.0], "v0": 0.1}]
        )
        for seed in range(20):
            world = load_scenario(cfg, seed)
            assert 1.0 <= world.robot(1).s <= 2.0


class TestStepWorld:
    def test_constant_velocity_integration(self):
        cfg = make_config()
        world = load_scenario(cfg, 0)
        s0 = world.robot(1).s
        step_world(world, keep(world))
        assert world.robot(1).s - s0 == pytest.approx(0.2 * 0.5, rel=1e-12)

    def test_speed_clamped_at_zero(self):
        cfg = make_config(
            robots=[{"id": 1, "kind": "learner", "lane": 0, "s_range": [1, 1], "v0": 0.0}]
        )
        world = load_scenario(cfg, 0)
        step_world(world, {1: MotionCommand(accel=-0.1)})
        assert world.robot(1).v == 0.0
        assert world.robot(1).s == 1.0

    def test_speed_clamped_at_vmax(self):
        cfg = make_config()
        world = load_scenario(cfg, 0)
        for _ in range(40):
            step_world(world, {1: MotionCommand(accel=0.5)})
            if world.status != RUNNING:
                break
            assert world.robot(1).v <= cfg.v_max + 1e-15
        assert world.robot(1).v == cfg.v_max

    def test_lane_change_linear_interpolation(self):
        # Hand-computed: lateral 0 -> 0.25 in 4 steps of 0.0625 world-y each.
        cfg = make_config(lane_change_steps=4)
        world = load_scenario(cfg, 0)
        ys = []
        step_world(world, {1: MotionCommand(lane_change_request=True)})
        ys.append(world_position(world, world.robot(1))[1])
        for _ in range(3):
            step_world(world, {1: MotionCommand()})
            ys.append(world_position(world, world.robot(1))[1])
        assert ys == pytest.approx([0.0625, 0.125, 0.1875, 0.25], abs=1e-15)
        robot = world.robot(1)
        assert robot.lane_flag == 1
        assert robot.lane == 1
        assert robot.lateral == 0.0
        assert robot.lane_change is None

    def test_lane_change_without_neighbor_is_noop(self):
        cfg = make_config()
        world = load_scenario(cfg, 0)
        # complete a change into lane 1 (which has no left neighbor)
        step_world(world, {1: MotionCommand(lane_change_request=True)})
        for _ in range(3):
            step_world(world, {1: MotionCommand()})
        y_before = world_position(world, world.robot(1))[1]
        step_world(world, {1: MotionCommand(lane_change_request=True)})
        assert world.robot(1).lane_flag == 1
        assert world_position(world, world.robot(1))[1] == y_before
        assert world.robot(1).lane_change is None

    def test_command_for_static_rejected(self):
        cfg = load_config("lane_change")
        world = load_scenario(cfg, 0)
        cmds = {1: MotionCommand(), 2: MotionCommand(), 3: MotionCommand()}
        with pytest.raises(WorldError):
            step_world(world, cmds)

    def test_missing_command_rejected(self):
        cfg = load_config("lane_change")
        world = load_scenario(cfg, 0)
        with pytest.raises(WorldError):
            step_world(world, {1: MotionCommand()})

    def test_step_after_terminal_rejected(self):
        cfg = make_config(episode_length=1)
        world = load_scenario(cfg, 0)
        step_world(world, keep(world))
        assert world.status == DONE
        with pytest.raises(WorldError):
            step_world(world, keep(world))

    def test_episode_terminates_at_exact_length(self):
        cfg = make_config(episode_length=7)
        world = load_scenario(cfg, 0)
        steps = 0
        while world.status == RUNNING:
            step_world(world, keep(world))
            steps += 1
        assert steps == 7 and world.t == 7 and world.status == DONE

    def test_determinism_over_command_sequence(self):
        cfg = load_config("cross_intersection")
        dicts = []
        for _ in range(2):
            world = load_scenario(cfg, 123)
            snaps = [world_to_dict(world)]
            rng = np.random.default_rng(55)
            while world.status == RUNNING:
                cmds = {
                    r.id: MotionCommand(accel=float(rng.uniform(-0.1, 0.1)))
                    for r in world.robots
                    if r.kind != "static"
                }
                step_world(world, cmds)
                snaps.append(world_to_dict(world))
            dicts.append(snaps)
        assert dicts[0] == dicts[1]


class TestDetectCollisions:
    def test_separated_pair(self):
        cfg = make_config(
            robots=[
                {"id": 1, "kind": "learner", "lane": 0, "s_range": [1, 1], "v0": 0.1, "radius": 0.08},
                {"id": 2, "kind": "learner", "lane": 0, "s_range": [1.3, 1.3], "v0": 0.1, "radius": 0.08},
            ]
        )
        world = load_scenario(cfg, 0)
        assert detect_collisions(world) == []

    def test_coincident_pair(self):
        cfg = make_config()
        world = load_scenario(cfg, 0)
        world.robots.append(
            type(world.robots[0])(id=2, kind="learner", lane=0, s=1.0, lateral=0.0, v=0.0, lane_flag=0, radius=0.08)
        )
        events = detect_collisions(world)
        assert len(events) == 1
        assert (events[0].robot_a, events[0].robot_b) == (1, 2)

    def test_square_corners_adjacent_only(self):
        # 4 robots on square corners, side < 2r <= diagonal: 4 adjacent pairs.
        r = 0.08
        side = 0.15  # < 0.16, diagonal 0.212 > 0.16
        world = load_scenario(make_config(), 0)
        RS = type(world.robots[0])
        world.robots = [
            RS(id=1, kind="learner", lane=0, s=1.0, lateral=0.0, v=0, lane_flag=0, radius=r),
            RS(id=2, kind="learner", lane=0, s=1.0 + side, lateral=0.0, v=0, lane_flag=0, radius=r),
            RS(id=3, kind="learner", lane=0, s=1.0, lateral=side, v=0, lane_flag=0, radius=r),
            RS(id=4, kind="learner", lane=0, s=1.0 + side, lateral=side, v=0, lane_flag=0, radius=r),
        ]
        events = {(e.robot_a, e.robot_b) for e in detect_collisions(world)}
        assert events == {(1, 2), (1, 3), (2, 4), (3, 4)}

    def test_matches_bruteforce_on_random_worlds(self):
        cfg = load_config("cross_intersection")
        rng = np.random.default_rng(2024)
        for _ in range(200):
            world = load_scenario(cfg, int(rng.integers(1 << 30)))
            for robot in world.robots:
                robot.s = float(rng.uniform(0.0, 2.6))
                robot.lateral = float(rng.uniform(-0.1, 0.1))
            got = {(e.robot_a, e.robot_b) for e in detect_collisions(world)}
            expected = set()
            robots = sorted(world.robots, key=lambda r: r.id)
            for i, ra in enumerate(robots):
                for rb in robots[i + 1 :]:
                    ax, ay = world_position(world, ra)
                    bx, by = world_position(world, rb)
                    if math.hypot(bx - ax, by - ay) < ra.radius + rb.radius:
                        expected.add((ra.id, rb.id))
            assert got == expected


class TestRaycastLidar:
    def test_lone_robot_sees_walls_or_rmax(self):
        cfg = make_config()
        world = load_scenario(cfg, 0)
        d = raycast_lidar(world, 1, 8, 3.5)
        assert len(d) == 8
        x0, y0, x1, y1 = arena_bounds(world.geometry)
        # beam 0 looks along +x from x=1: wall at 20 is beyond r_max
        assert d[0] == 3.5
        # beam 2 looks along +y: wall at lane-1 top edge
        robot_y = world_position(world, world.robot(1))[1]
        assert d[2] == pytest.approx(y1 - robot_y, abs=1e-12)
        assert np.all(d > 0) and np.all(d <= 3.5)

    def test_obstacle_dead_ahead(self):
        # analytic ray-circle: center distance 1.0, radius 0.08 -> 0.92
        cfg = make_config(
            robots=[
                {"id": 1, "kind": "learner", "lane": 0, "s_range": [1, 1], "v0": 0.1, "radius": 0.08},
                {"id": 2, "kind": "static", "lane": 0, "s_range": [2, 2], "v0": 0, "radius": 0.08},
            ]
        )
        world = load_scenario(cfg, 0)
        d = raycast_lidar(world, 1, 8, 3.5)
        assert d[0] == pytest.approx(0.92, abs=1e-12)

    def test_mirror_symmetry(self):
        cfg = make_config(
            geometry={
                "topology": "parallel_merge",
                "lane_length": 20.0,
                "lane_width": 3.0,
                "lanes": [{"id": 0, "axis": "+x", "center": 0.0}],
                "neighbors": {"0": None},
            },
            robots=[
                {"id": 1, "kind": "learner", "lane": 0, "s_range": [10, 10], "v0": 0.1},
                {"id": 2, "kind": "static", "lane": 0, "s_range": [10.8, 10.8], "v0": 0},
                {"id": 3, "kind": "static", "lane": 0, "s_range": [9.2, 9.2], "v0": 0},
            ],
            success={},
        )
        world = load_scenario(cfg, 0)
        world.robot(2).lateral = 0.7
        world.robot(3).lateral = -0.7
        world.robot(3).s = 10.8  # mirror of robot 2 about the beam-0 axis
        K = 16
        d = raycast_lidar(world, 1, K, 3.5)
        for k in range(1, K):
            assert d[k] == pytest.approx(d[(K - k) % K], abs=1e-9)

    def test_unknown_robot(self):
        world = load_scenario(make_config(), 0)
        with pytest.raises(WorldError):
            raycast_lidar(world, 99, 8, 3.5)

    def test_bounds_property(self):
        cfg = load_config("cross_intersection")
        rng = np.random.default_rng(77)
        for _ in range(50):
            world = load_scenario(cfg, int(rng.integers(1 << 30)))
            for robot in world.robots:
                robot.s = float(rng.uniform(0.2, 2.4))
            for robot in world.robots:
                d = raycast_lidar(world, robot.id, 24, 3.5)
                assert np.all(d > 0.0) and np.all(d <= 3.5)


class TestCheckSuccess:
    def test_merging_robot_success(self):
        cfg = load_config("lane_change")
        world = load_scenario(cfg, 0)
        robot = world.robot(2)
        robot.lane = 1
        robot.lane_flag = 1
        robot.s = world.robot(3).s + 0.2
        assert check_success(world, 2) is True

    def test_merging_robot_behind_obstacle(self):
        cfg = load_config("lane_change")
        world = load_scenario(cfg, 0)
        robot = world.robot(2)
        robot.lane = 1
        robot.lane_flag = 1
        robot.s = world.robot(3).s - 0.2
        assert check_success(world, 2) is False

    def test_collision_precludes_success(self):
        cfg = load_config("lane_change")
        world = load_scenario(cfg, 0)
        from deskdrive.world import CollisionEvent

        world.collisions.append(CollisionEvent(2, 3, 5))
        robot = world.robot(2)
        robot.lane = 1
        robot.lane_flag = 1
        robot.s = 5.0
        assert check_success(world, 2) is False
        assert check_success(world, 1) is True  # uninvolved robot unaffected

    def test_static_never_succeeds(self):
        world = load_scenario(load_config("lane_change"), 0)
        assert check_success(world, 3) is False

    def test_cross_far_edge(self):
        cfg = load_config("cross_intersection")
        world = load_scenario(cfg, 0)
        # far edge: lane starts at -1.3, conflict zone half-width 0.25 -> s = 1.55
        assert conflict_zone_far_edge_s(world.geometry, 0) == pytest.approx(1.55, abs=1e-12)
        robot = world.robot(1)
        robot.s = 1.55 + 0.01
        assert check_success(world, 1) is True
        robot.s = 1.55 - 0.01
        assert check_success(world, 1) is False


class TestGeometryFrames:
    def test_lane_frames_cover_expected_world_spans(self):
        cfg = load_config("cross_intersection")
        world = load_scenario(cfg, 0)
        for lane in world.geometry.lanes:
            start = lane_start(lane, world.geometry.topology)
            assert abs(start) == pytest.approx(1.3, abs=1e-12)

    def test_speed_bounds_random_commands(self):
        cfg = load_config("lane_change")
        rng = np.random.default_rng(5)
        world = load_scenario(cfg, 3)
        while world.status == RUNNING:
            cmds = {
                r.id: MotionCommand(accel=float(rng.uniform(-0.6, 0.6)))
                for r in world.robots
                if r.kind != "static"
            }
            step_world(world, cmds)
            for r in world.robots:
                assert 0.0 <= r.v <= cfg.v_max
                if r.kind == "static":
                    assert r.v == 0.0
