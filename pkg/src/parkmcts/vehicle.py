"""Bicycle-model kinematics, the discretized action set, and motion checks.

The transition applies one Euler step per action; collision checking
interpolates along the constant-curvature arc implied by the steer angle so
short moves cannot cut corners through obstacles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from . import dubins
from .geometry import (
    ConvexPolygon,
    Pose,
    VehicleFootprint,
    boxes_intersect_polygon,
    footprint_corners_batch,
    footprint_polygon,
    polygons_intersect,
    wrap_angle,
)

if TYPE_CHECKING:
    from .scenarios import Scenario

GEAR_FORWARD = 1
GEAR_REVERSE = -1

# arc-length spacing for collision interpolation along a motion
COLLISION_STEP = 0.1


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float
    max_steer: float
    footprint: VehicleFootprint

    def __post_init__(self) -> None:
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        if not (0 < self.max_steer < math.pi / 2):
            raise ValueError("max_steer must lie in (0, pi/2)")

    @property
    def turn_radius(self) -> float:
        """Tightest kinematically feasible turn radius."""
        return self.wheelbase / math.tan(self.max_steer)


@dataclass(frozen=True)
class Action:
    distance: float  # signed; negative = reverse
    steer: float

    def __post_init__(self) -> None:
        if self.distance == 0.0:
            raise ValueError("action distance must be nonzero")

    @property
    def gear(self) -> int:
        return GEAR_FORWARD if self.distance > 0 else GEAR_REVERSE


@dataclass(frozen=True)
class MotionState:
    pose: Pose
    gear: int
    steer: float


@dataclass(frozen=True)
class ActionSet:
    """Fixed-order action list shared by the search tree and the network.

    Ordering contract: the forward block with ascending steer comes first,
    then the reverse block with ascending steer.
    """

    actions: tuple[Action, ...]
    steer_count: int
    step: float

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def distances(self) -> np.ndarray:
        return np.array([a.distance for a in self.actions])

    @property
    def steers(self) -> np.ndarray:
        return np.array([a.steer for a in self.actions])

    def descriptor(self) -> dict:
        """Identity of the set, embedded in checkpoints for compatibility checks."""
        return {
            "action_count": len(self.actions),
            "steer_count": self.steer_count,
            "step": self.step,
            "max_steer": float(max(a.steer for a in self.actions)),
        }


def make_action_set(params: VehicleParams, steer_count: int = 7, step: float = 0.8) -> ActionSet:
    if steer_count < 3 or steer_count % 2 == 0:
        raise ValueError("steer_count must be odd and >= 3 so zero steer is included")
    if step <= 0:
        raise ValueError("step must be positive")
    steers = np.linspace(-params.max_steer, params.max_steer, steer_count)
    steers[steer_count // 2] = 0.0
    actions = [Action(step, float(s)) for s in steers]
    actions += [Action(-step, float(s)) for s in steers]
    return ActionSet(actions=tuple(actions), steer_count=steer_count, step=step)


def transition(state: MotionState, action: Action, params: VehicleParams) -> MotionState:
    """One Euler step of the motion equations; heading renormalized."""
    pose = state.pose
    x = pose.x + action.distance * math.cos(pose.heading)
    y = pose.y + action.distance * math.sin(pose.heading)
    heading = pose.heading + action.distance * math.tan(action.steer) / params.wheelbase
    return MotionState(pose=Pose(x, y, heading), gear=action.gear, steer=action.steer)


def arc_poses(pose: Pose, distance: float, steer: float, params: VehicleParams, step: float = COLLISION_STEP) -> np.ndarray:
    """Poses along the constant-curvature arc of a motion, endpoints included.

    Returns (m, 3) rows of x, y, heading sampled at arc-length spacing <= step.
    """
    n = max(1, int(math.ceil(abs(distance) / step)))
    s = np.linspace(0.0, distance, n + 1)
    kappa = math.tan(steer) / params.wheelbase
    if kappa == 0.0:
        xs = pose.x + s * math.cos(pose.heading)
        ys = pose.y + s * math.sin(pose.heading)
        hs = np.full_like(s, pose.heading)
    else:
        hs = pose.heading + s * kappa
        xs = pose.x + (np.sin(hs) - math.sin(pose.heading)) / kappa
        ys = pose.y - (np.cos(hs) - math.cos(pose.heading)) / kappa
    return np.stack([xs, ys, hs], axis=1)


def _poses_in_bounds(corners: np.ndarray, bounds: tuple[float, float, float, float]) -> np.ndarray:
    xmin, ymin, xmax, ymax = bounds
    ok_x = (corners[..., 0] >= xmin) & (corners[..., 0] <= xmax)
    ok_y = (corners[..., 1] >= ymin) & (corners[..., 1] <= ymax)
    return (ok_x & ok_y).all(axis=-1)


def poses_clear(poses: np.ndarray, scenario: "Scenario") -> bool:
    """True iff the vehicle body is in bounds and obstacle-free at every pose."""
    corners = footprint_corners_batch(scenario.vehicle.footprint, poses)
    if not _poses_in_bounds(corners, scenario.bounds).all():
        return False
    if not scenario.obstacles:
        return True
    headings = poses[:, 2]
    sweep = (
        corners[..., 0].min(),
        corners[..., 1].min(),
        corners[..., 0].max(),
        corners[..., 1].max(),
    )
    for obs in scenario.obstacles:
        oxmin, oymin, oxmax, oymax = obs.polygon.aabb()
        if oxmax < sweep[0] or oxmin > sweep[2] or oymax < sweep[1] or oymin > sweep[3]:
            continue
        if boxes_intersect_polygon(corners, obs.polygon, headings).any():
            return False
    return True


def _implied_motion(state_from: MotionState, state_to: MotionState, params: VehicleParams) -> tuple[float, float]:
    """Recover the (distance, steer) of the action linking two states."""
    steer = state_to.steer
    if steer == 0.0:
        d = math.hypot(state_to.pose.x - state_from.pose.x, state_to.pose.y - state_from.pose.y)
        return (d if state_to.gear == GEAR_FORWARD else -d), steer
    dheading = wrap_angle(state_to.pose.heading - state_from.pose.heading)
    return dheading * params.wheelbase / math.tan(steer), steer


def feasible(state_from: MotionState, state_to: MotionState, scenario: "Scenario") -> bool:
    """Collision/bounds check for one transition, densely interpolated."""
    params = scenario.vehicle
    distance, steer = _implied_motion(state_from, state_to, params)
    poses = arc_poses(state_from.pose, distance, steer, params)
    end = np.array([[state_to.pose.x, state_to.pose.y, state_to.pose.heading]])
    return poses_clear(np.concatenate([poses, end], axis=0), scenario)


def probe_actions(state: MotionState, action_set: ActionSet, scenario: "Scenario") -> tuple[np.ndarray, np.ndarray]:
    """Feasibility mask and Euler end poses for every action in the set.

    The mask covers the interpolated arc of each action plus its Euler
    endpoint; the (A, 3) end-pose array is the transition result each child
    node will store (headings unwrapped).
    """
    params = scenario.vehicle
    pose = state.pose
    n_actions = len(action_set)
    dist = action_set.distances
    steer = action_set.steers
    kappa = np.tan(steer) / params.wheelbase
    cos_h = math.cos(pose.heading)
    sin_h = math.sin(pose.heading)

    m = max(1, int(math.ceil(action_set.step / COLLISION_STEP)))
    frac = np.linspace(0.0, 1.0, m + 1)
    s = dist[:, None] * frac[None, :]  # (A, m+1)
    hs = pose.heading + s * kappa[:, None]
    straight = kappa == 0.0
    safe_kappa = np.where(straight, 1.0, kappa)
    xs = np.where(
        straight[:, None],
        pose.x + s * cos_h,
        pose.x + (np.sin(hs) - sin_h) / safe_kappa[:, None],
    )
    ys = np.where(
        straight[:, None],
        pose.y + s * sin_h,
        pose.y - (np.cos(hs) - cos_h) / safe_kappa[:, None],
    )
    # Euler endpoints (the poses the tree actually stores)
    ex = pose.x + dist * cos_h
    ey = pose.y + dist * sin_h
    eh = pose.heading + dist * kappa
    end_poses = np.stack([ex, ey, eh], axis=1)
    xs = np.concatenate([xs, ex[:, None]], axis=1)
    ys = np.concatenate([ys, ey[:, None]], axis=1)
    hs = np.concatenate([hs, eh[:, None]], axis=1)

    poses = np.stack([xs, ys, hs], axis=2).reshape(-1, 3)  # (A*(m+2), 3)
    corners = footprint_corners_batch(params.footprint, poses)
    ok = _poses_in_bounds(corners, scenario.bounds)
    headings = poses[:, 2]
    if scenario.obstacles:
        sweep = (
            corners[..., 0].min(),
            corners[..., 1].min(),
            corners[..., 0].max(),
            corners[..., 1].max(),
        )
        for obs in scenario.obstacles:
            oxmin, oymin, oxmax, oymax = obs.polygon.aabb()
            if oxmax < sweep[0] or oxmin > sweep[2] or oymax < sweep[1] or oymin > sweep[3]:
                continue
            remaining = ok.nonzero()[0]
            if remaining.size == 0:
                break
            hit = boxes_intersect_polygon(corners[remaining], obs.polygon, headings[remaining])
            ok[remaining[hit]] = False
    return ok.reshape(n_actions, -1).all(axis=1), end_poses


def feasible_actions(state: MotionState, action_set: ActionSet, scenario: "Scenario") -> np.ndarray:
    """Vectorized feasibility of every action in the set from one state."""
    ok, _ = probe_actions(state, action_set, scenario)
    return ok


def dubins_connects(
    from_pose: Pose,
    to_pose: Pose,
    params: VehicleParams,
    scenario: "Scenario",
) -> Optional[float]:
    """Length of the shortest collision-free Dubins connection, if any."""
    path = dubins.shortest_path(
        (from_pose.x, from_pose.y, from_pose.heading),
        (to_pose.x, to_pose.y, to_pose.heading),
        params.turn_radius,
    )
    if path is None:
        return None
    poses = dubins.sample_path(path, COLLISION_STEP)
    if not poses_clear(poses, scenario):
        return None
    return path.length


def state_in_collision(state: MotionState, scenario: "Scenario") -> bool:
    """Footprint-vs-obstacles and bounds check for a single state."""
    poly = footprint_polygon(scenario.vehicle.footprint, state.pose)
    xmin, ymin, xmax, ymax = scenario.bounds
    bxmin, bymin, bxmax, bymax = poly.aabb()
    if bxmin < xmin or bymin < ymin or bxmax > xmax or bymax > ymax:
        return True
    return any(polygons_intersect(poly, obs.polygon) for obs in scenario.obstacles)
