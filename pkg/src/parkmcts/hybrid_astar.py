"""Hybrid A* baseline sharing the tree search's kinematics, cost and goal test.

Continuous states are closed on a (position, heading, gear) grid key; the
first arrival at a key wins.  The heuristic is the obstacle-free shortest
direct connection length scaled by the per-metre cost weight, and the goal
test is the same collision-checked connection used by the tree search.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from . import dubins
from .costs import CostWeights, PathCost, clearance_below
from .geometry import Pose
from .mcts import PlannedPath, VIRTUAL_MS_PER_NODE
from .vehicle import (
    Action,
    ActionSet,
    MotionState,
    dubins_connects,
    feasible_actions,
    make_action_set,
    state_in_collision,
    transition,
)

if TYPE_CHECKING:
    from .scenarios import Scenario

POSITION_RESOLUTION = 0.1
HEADING_RESOLUTION = 0.01


@dataclass(frozen=True)
class GridKey:
    xi: int
    yi: int
    phii: int
    gear: int


def grid_key(state: MotionState, pos_res: float = POSITION_RESOLUTION, heading_res: float = HEADING_RESOLUTION) -> GridKey:
    return GridKey(
        xi=int(math.floor(state.pose.x / pos_res)),
        yi=int(math.floor(state.pose.y / pos_res)),
        phii=int(math.floor(state.pose.heading / heading_res)),
        gear=state.gear,
    )


@dataclass
class AStarNode:
    state: MotionState
    g: float  # accumulated (negated) path cost, nonnegative
    h: float
    parent: Optional["AStarNode"]
    action: Optional[Action]

    def chain(self) -> tuple[list[MotionState], list[Action]]:
        states: list[MotionState] = []
        actions: list[Action] = []
        node: Optional[AStarNode] = self
        while node is not None:
            states.append(node.state)
            if node.action is not None:
                actions.append(node.action)
            node = node.parent
        states.reverse()
        actions.reverse()
        return states, actions


def heuristic(state: MotionState, goal: Pose, params, weights: CostWeights) -> float:
    """Distance-weight times the obstacle-free direct connection length."""
    path = dubins.shortest_path(
        (state.pose.x, state.pose.y, state.pose.heading),
        (goal.x, goal.y, goal.heading),
        params.turn_radius,
    )
    return 0.0 if path is None else weights.w_dist * path.length


@dataclass
class PlanStats:
    nodes_expanded: int
    wall_ms: float
    termination: str  # found | exhausted | node_limit | time_limit

    @property
    def virtual_ms(self) -> float:
        return self.nodes_expanded * VIRTUAL_MS_PER_NODE

    @property
    def success(self) -> bool:
        return self.termination == "found"


def plan(
    scenario: "Scenario",
    weights: CostWeights | None = None,
    action_set: ActionSet | None = None,
    pos_res: float = POSITION_RESOLUTION,
    heading_res: float = HEADING_RESOLUTION,
    node_limit: int = 20_000,
    time_limit_ms: Optional[float] = None,
    heuristic_weight: float = 1.0,
) -> tuple[Optional[PlannedPath], PlanStats]:
    """Best-first search over the shared action set; returns path + stats."""
    weights = weights if weights is not None else CostWeights()
    params = scenario.vehicle
    if action_set is None:
        action_set = make_action_set(params)
    if state_in_collision(scenario.start, scenario):
        raise ValueError("start pose is in collision or out of bounds")

    t0 = time.perf_counter()
    deadline = None if time_limit_ms is None else t0 + time_limit_ms / 1000.0

    start_hinge = weights.safety_threshold - clearance_below(scenario.start, scenario, weights.safety_threshold)
    start = AStarNode(
        state=scenario.start,
        g=weights.w_safety * start_hinge,
        h=heuristic(scenario.start, scenario.goal, params, weights),
        parent=None,
        action=None,
    )
    counter = 0
    open_heap: list[tuple[float, int, AStarNode]] = [(start.g + heuristic_weight * start.h, counter, start)]
    closed: set[GridKey] = set()
    best_g: dict[GridKey, float] = {grid_key(start.state, pos_res, heading_res): start.g}
    expanded = 0
    termination = "exhausted"
    goal_node: Optional[AStarNode] = None
    connect_length = 0.0

    while open_heap:
        if expanded >= node_limit:
            termination = "node_limit"
            break
        if deadline is not None and time.perf_counter() >= deadline:
            termination = "time_limit"
            break
        _, _, node = heapq.heappop(open_heap)
        key = grid_key(node.state, pos_res, heading_res)
        if key in closed:
            continue
        closed.add(key)
        expanded += 1

        length = dubins_connects(node.state.pose, scenario.goal, params, scenario)
        if length is not None:
            termination = "found"
            goal_node = node
            connect_length = length
            break

        ok = feasible_actions(node.state, action_set, scenario)
        for idx in np.nonzero(ok)[0]:
            action = action_set.actions[int(idx)]
            child_state = transition(node.state, action, params)
            child_key = grid_key(child_state, pos_res, heading_res)
            if child_key in closed:
                continue
            hinge = weights.safety_threshold - clearance_below(child_state, scenario, weights.safety_threshold)
            dg = weights.w_dist * abs(action.distance) + weights.w_safety * hinge
            dg += weights.w_steer * abs(child_state.steer - node.state.steer)
            if child_state.gear != node.state.gear:
                dg += weights.w_gear
            g = node.g + dg
            if child_key in best_g and best_g[child_key] <= g:
                continue
            best_g[child_key] = g
            child = AStarNode(
                state=child_state,
                g=g,
                h=heuristic(child_state, scenario.goal, params, weights),
                parent=node,
                action=action,
            )
            counter += 1
            heapq.heappush(open_heap, (g + heuristic_weight * child.h, counter, child))

    wall_ms = (time.perf_counter() - t0) * 1000.0
    stats = PlanStats(nodes_expanded=expanded, wall_ms=wall_ms, termination=termination)
    if goal_node is None:
        return None, stats

    states, actions = goal_node.chain()
    end = states[-1].pose
    tail = dubins.shortest_path(
        (end.x, end.y, end.heading), (scenario.goal.x, scenario.goal.y, scenario.goal.heading), params.turn_radius
    )
    poses = dubins.sample_path(tail, 0.1)
    poses[:, 2] = (poses[:, 2] + math.pi) % (2.0 * math.pi) - math.pi
    safety = -weights.w_safety * start_hinge
    comfort = 0.0
    efficiency = 0.0
    for prev, cur, action in zip(states, states[1:], actions):
        hinge = weights.safety_threshold - clearance_below(cur, scenario, weights.safety_threshold)
        safety -= weights.w_safety * hinge
        if cur.gear != prev.gear:
            comfort -= weights.w_gear
        comfort -= weights.w_steer * abs(cur.steer - prev.steer)
        efficiency -= weights.w_dist * abs(action.distance)
    path = PlannedPath(
        states=states,
        actions=actions,
        dubins_poses=poses,
        dubins_length=connect_length,
        cost=PathCost.from_components(safety, comfort, efficiency),
    )
    return path, stats
