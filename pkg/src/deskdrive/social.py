"""Rule-based driver for social robots: classic car-following acceleration
plus a perception-uncertainty variant that perturbs the desired gap with a
Gaussian offset and gates the interaction term when the perturbed gap is
nonpositive.
"""

from __future__ import annotations

import math

import numpy as np

from .scenario import IDMParams
from .world import MotionCommand, WorldState, world_position


class FollowStateError(ValueError):
    """Raised for a nonpositive follow gap."""


def desired_gap(v: float, dv: float, p: IDMParams, dSp: float = 0.0) -> float:
    """Desired following distance at speed ``v`` and closing speed ``dv``.

    ``dSp`` is the perceived-gap offset; 0 gives the classic expression
    S_0 + max(v*headway + v*dv / (2*sqrt(a*b)), 0).
    """
    dynamic = v * p.headway + v * dv / (2.0 * math.sqrt(p.a * p.b))
    return p.S_0 + max(dynamic, 0.0) + dSp


def idm_accel(v: float, gap: float, dv: float, p: IDMParams) -> float:
    """Classic car-following acceleration a*(1 - (v/v_f)^4 - (gap*/gap)^2)."""
    if gap <= 0.0:
        raise FollowStateError(f"nonpositive follow gap {gap}")
    want = desired_gap(v, dv, p)
    return p.a * (1.0 - (v / p.v_f) ** 4 - (want / gap) ** 2)


def pu_idm_accel(v: float, gap: float, dv: float, p: IDMParams, rng: np.random.Generator) -> float:
    """Perception-uncertainty acceleration: the desired gap includes a
    Normal(mu, sigma^2) offset and the interaction term is dropped entirely
    when the perturbed desired gap is nonpositive."""
    if gap <= 0.0:
        raise FollowStateError(f"nonpositive follow gap {gap}")
    dSp = p.mu if p.sigma == 0.0 else float(rng.normal(p.mu, p.sigma))
    want = desired_gap(v, dv, p, dSp)
    if want <= 0.0:
        return p.a * (1.0 - (v / p.v_f) ** 4)
    return p.a * (1.0 - (v / p.v_f) ** 4 - (want / gap) ** 2)


def _leader(world: WorldState, robot_id: int):
    me = world.robot(robot_id)
    best = None
    for other in world.robots:
        if other.id == robot_id or other.lane != me.lane:
            continue
        if other.s > me.s and (best is None or other.s < best.s):
            best = other
    return best


def social_policy(world: WorldState, robot_id: int, p: IDMParams, rng: np.random.Generator) -> MotionCommand:
    """Car-following command for a social robot: follow the nearest same-lane
    leader; free-flow against a sensing-range sentinel gap when there is none.
    Social robots never change lanes."""
    me = world.robot(robot_id)
    if me.kind != "social":
        raise TypeError(f"social_policy called on robot {robot_id} of kind {me.kind!r}")
    lead = _leader(world, robot_id)
    if lead is None:
        gap = world.cfg.lidar_r_max
        dv = 0.0
    else:
        (xa, ya), (xb, yb) = world_position(world, me), world_position(world, lead)
        gap = math.hypot(xb - xa, yb - ya) - me.radius - lead.radius
        dv = me.v - lead.v
    accel = pu_idm_accel(me.v, gap, dv, p, rng)
    accel = max(-world.cfg.accel_cap, min(p.a, accel))
    return MotionCommand(accel=accel, lane_change_request=False)
