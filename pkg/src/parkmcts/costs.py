"""Path cost (safety / comfort / efficiency) and the blended node value.

All cost components are nonpositive; the total is clamped to [-1, 0] so the
blend alpha0 * v + alpha1 * total stays inside [-1, 1] for admissible
weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .geometry import (
    CollisionStateError,
    boxes_polygon_distance,
    footprint_corners_batch,
    footprint_polygon,
    polygon_distance,
    polygons_intersect,
)
from .vehicle import MotionState, _implied_motion

if TYPE_CHECKING:
    from .scenarios import Scenario


@dataclass(frozen=True)
class CostWeights:
    safety_threshold: float = 0.3
    w_safety: float = 0.5
    w_gear: float = 0.05
    w_steer: float = 0.02
    w_dist: float = 0.01
    alpha0: float = 0.7
    alpha1: float = 0.3

    def __post_init__(self) -> None:
        for name in ("safety_threshold", "w_safety", "w_gear", "w_steer", "w_dist", "alpha0", "alpha1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.alpha0 + self.alpha1 > 1.0 + 1e-12:
            raise ValueError("alpha0 + alpha1 must not exceed 1 so values stay in [-1, 1]")


@dataclass(frozen=True)
class PathCost:
    safety: float
    comfort: float
    efficiency: float
    total: float  # safety + comfort + efficiency, clamped to [-1, 0]

    @staticmethod
    def from_components(safety: float, comfort: float, efficiency: float) -> "PathCost":
        return PathCost(safety, comfort, efficiency, max(-1.0, safety + comfort + efficiency))


ZERO_COST = PathCost(0.0, 0.0, 0.0, 0.0)


def clearance_below(state: MotionState, scenario: "Scenario", threshold: float) -> float:
    """min(clearance, threshold) for one state; raises on collision.

    Obstacles farther than the threshold cannot contribute to the safety
    penalty, so their exact distances are skipped via a bounding-box test.
    """
    poly = footprint_polygon(scenario.vehicle.footprint, state.pose)
    pxmin, pymin, pxmax, pymax = poly.aabb()
    best = threshold
    for obs in scenario.obstacles:
        oxmin, oymin, oxmax, oymax = obs.polygon.aabb()
        gap_x = max(oxmin - pxmax, pxmin - oxmax, 0.0)
        gap_y = max(oymin - pymax, pymin - oymax, 0.0)
        if math.hypot(gap_x, gap_y) >= best:
            continue
        if polygons_intersect(poly, obs.polygon):
            raise CollisionStateError("path state is in collision")
        best = min(best, polygon_distance(poly, obs.polygon))
    return best


def clearance_below_batch(poses: np.ndarray, scenario: "Scenario", threshold: float) -> np.ndarray:
    """min(clearance, threshold) for many collision-free poses at once.

    poses: (m, 3) rows of x, y, heading.  Collisions are the caller's
    responsibility to exclude; overlapping pairs would report a bogus
    positive boundary distance.
    """
    m = poses.shape[0]
    best = np.full(m, threshold)
    if not scenario.obstacles or m == 0:
        return best
    corners = footprint_corners_batch(scenario.vehicle.footprint, poses)
    cxmin = corners[:, :, 0].min(axis=1)
    cxmax = corners[:, :, 0].max(axis=1)
    cymin = corners[:, :, 1].min(axis=1)
    cymax = corners[:, :, 1].max(axis=1)
    for obs in scenario.obstacles:
        oxmin, oymin, oxmax, oymax = obs.polygon.aabb()
        gap_x = np.maximum(np.maximum(oxmin - cxmax, cxmin - oxmax), 0.0)
        gap_y = np.maximum(np.maximum(oymin - cymax, cymin - oymax), 0.0)
        near = np.hypot(gap_x, gap_y) < best
        if not near.any():
            continue
        idx = np.nonzero(near)[0]
        dist = boxes_polygon_distance(corners[idx], obs.polygon)
        best[idx] = np.minimum(best[idx], dist)
    return best


def step_cost_terms(
    prev: MotionState,
    cur: MotionState,
    scenario: "Scenario",
    weights: CostWeights,
) -> tuple[float, float, float]:
    """Nonpositive (safety, comfort, efficiency) increments for one move."""
    safety = -weights.w_safety * (weights.safety_threshold - clearance_below(cur, scenario, weights.safety_threshold))
    comfort = 0.0
    if cur.gear != prev.gear:
        comfort -= weights.w_gear
    comfort -= weights.w_steer * abs(cur.steer - prev.steer)
    distance, _ = _implied_motion(prev, cur, scenario.vehicle)
    efficiency = -weights.w_dist * abs(distance)
    return safety, comfort, efficiency


def path_cost(states: Sequence[MotionState], scenario: "Scenario", weights: CostWeights) -> PathCost:
    """Accumulated cost of a state sequence produced by valid transitions."""
    if not states:
        raise ValueError("path must contain at least one state")
    safety = -weights.w_safety * (
        weights.safety_threshold - clearance_below(states[0], scenario, weights.safety_threshold)
    )
    comfort = 0.0
    efficiency = 0.0
    for prev, cur in zip(states, states[1:]):
        ds, dc, de = step_cost_terms(prev, cur, scenario, weights)
        safety += ds
        comfort += dc
        efficiency += de
    return PathCost.from_components(safety, comfort, efficiency)


def node_value(v: float, cost: PathCost, weights: CostWeights) -> float:
    """Blend the evaluator value with the accumulated path cost."""
    if not (0.0 <= v <= 1.0):
        raise ValueError("value estimate must lie in [0, 1]")
    return weights.alpha0 * v + weights.alpha1 * cost.total


def terminal_reward(reached: bool) -> float:
    return 1.0 if reached else 0.0
