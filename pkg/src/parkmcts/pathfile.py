"""Planned-path files: serialization and independent re-validation.

A path file stores the executed pose chain with its per-segment actions, the
closing direct-connection tail, the cost breakdown and planner stats.  The
validator recomputes everything from the scenario: kinematic consistency of
every action segment, collision freedom, the cost breakdown, and the tail
geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import dubins
from .costs import CostWeights, path_cost
from .geometry import Pose
from .mcts import PlannedPath
from .scenarios import Scenario
from .textio import DocumentError, FieldReader, fmt_float, fmt_floats, read_document, write_document
from .vehicle import Action, GEAR_FORWARD, MotionState, feasible, poses_clear

_GEAR_NAMES = {1: "forward", -1: "reverse"}
_GEAR_VALUES = {"forward": 1, "reverse": -1}


@dataclass
class PathFile:
    scenario_id: str
    planner: str
    termination: str
    nodes: int
    millis: float
    path: Optional[PlannedPath]  # None when the planner failed

    @property
    def found(self) -> bool:
        return self.path is not None


def pathfile_to_pairs(pf: PathFile) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = [
        ("scenario_id", pf.scenario_id),
        ("planner", pf.planner),
        ("termination", pf.termination),
        ("nodes", str(pf.nodes)),
        ("millis", fmt_float(pf.millis)),
        ("found", "1" if pf.found else "0"),
    ]
    if pf.path is None:
        return pairs
    p = pf.path
    pairs += [
        ("cost.safety", fmt_float(p.cost.safety)),
        ("cost.comfort", fmt_float(p.cost.comfort)),
        ("cost.efficiency", fmt_float(p.cost.efficiency)),
        ("cost.total", fmt_float(p.cost.total)),
        ("pose_count", str(len(p.states))),
    ]
    for i, st in enumerate(p.states):
        pairs.append(
            (
                f"pose.{i}",
                f"{fmt_floats((st.pose.x, st.pose.y, st.pose.heading))} "
                f"{_GEAR_NAMES[st.gear]} {fmt_float(st.steer)}",
            )
        )
    for i, action in enumerate(p.actions):
        pairs.append((f"action.{i}", fmt_floats((action.distance, action.steer))))
    pairs.append(("dubins_length", fmt_float(p.dubins_length)))
    pairs.append(("dubins_pose_count", str(len(p.dubins_poses))))
    for i, row in enumerate(p.dubins_poses):
        pairs.append((f"dubins_pose.{i}", fmt_floats(row)))
    return pairs


def write_pathfile(pf: PathFile, path: str | Path) -> None:
    write_document(path, pathfile_to_pairs(pf))


def read_pathfile(path: str | Path) -> PathFile:
    fields = read_document(path)
    src = str(path)
    r = FieldReader(fields, src)
    scenario_id = r.str_("scenario_id")
    planner = r.str_("planner")
    termination = r.str_("termination")
    nodes = r.int_("nodes")
    millis = r.float_("millis")
    found = r.int_("found")
    planned: Optional[PlannedPath] = None
    if found:
        from .costs import PathCost

        cost = PathCost(
            safety=r.float_("cost.safety"),
            comfort=r.float_("cost.comfort"),
            efficiency=r.float_("cost.efficiency"),
            total=r.float_("cost.total"),
        )
        n_poses = r.int_("pose_count")
        states = []
        for i in range(n_poses):
            toks = r.str_(f"pose.{i}").split()
            if len(toks) != 5 or toks[3] not in _GEAR_VALUES:
                raise DocumentError(f"{src}: field 'pose.{i}' needs 'x y heading forward|reverse steer'")
            states.append(
                MotionState(
                    pose=Pose(float(toks[0]), float(toks[1]), float(toks[2])),
                    gear=_GEAR_VALUES[toks[3]],
                    steer=float(toks[4]),
                )
            )
        actions = []
        for i in range(n_poses - 1):
            vals = r.floats(f"action.{i}")
            if len(vals) != 2:
                raise DocumentError(f"{src}: field 'action.{i}' needs 'distance steer'")
            actions.append(Action(distance=vals[0], steer=vals[1]))
        dubins_length = r.float_("dubins_length")
        n_tail = r.int_("dubins_pose_count")
        tail = np.zeros((n_tail, 3))
        for i in range(n_tail):
            vals = r.floats(f"dubins_pose.{i}")
            if len(vals) != 3:
                raise DocumentError(f"{src}: field 'dubins_pose.{i}' needs 3 numbers")
            tail[i] = vals
        planned = PlannedPath(
            states=states, actions=actions, dubins_poses=tail, dubins_length=dubins_length, cost=cost
        )
    r.finish()
    return PathFile(
        scenario_id=scenario_id,
        planner=planner,
        termination=termination,
        nodes=nodes,
        millis=millis,
        path=planned,
    )


def validate_pathfile(pf: PathFile, scenario: Scenario, weights: CostWeights) -> list[str]:
    """Re-derive everything the file claims; returns the list of violations."""
    problems: list[str] = []
    if pf.scenario_id != scenario.id:
        problems.append("scenario-id-mismatch")
    if pf.path is None:
        return problems
    p = pf.path
    params = scenario.vehicle
    if len(p.actions) != len(p.states) - 1:
        problems.append("action-count-mismatch")
        return problems

    start = scenario.start
    if (
        abs(p.states[0].pose.x - start.pose.x) > 1e-9
        or abs(p.states[0].pose.y - start.pose.y) > 1e-9
        or abs(p.states[0].pose.heading - start.pose.heading) > 1e-9
    ):
        problems.append("path-does-not-start-at-scenario-start")

    def angle_gap(a: float, b: float) -> float:
        return abs((a - b + math.pi) % (2.0 * math.pi) - math.pi)

    for i, (prev, cur, action) in enumerate(zip(p.states, p.states[1:], p.actions)):
        if abs(action.steer) > params.max_steer + 1e-12:
            problems.append(f"segment-{i}-steer-out-of-range")
        expect_x = prev.pose.x + action.distance * math.cos(prev.pose.heading)
        expect_y = prev.pose.y + action.distance * math.sin(prev.pose.heading)
        expect_h = prev.pose.heading + action.distance * math.tan(action.steer) / params.wheelbase
        if (
            abs(expect_x - cur.pose.x) > 1e-9
            or abs(expect_y - cur.pose.y) > 1e-9
            or angle_gap(expect_h, cur.pose.heading) > 1e-9
        ):
            problems.append(f"segment-{i}-kinematics-violated")
        if cur.gear != (1 if action.distance > 0 else -1) or abs(cur.steer - action.steer) > 1e-12:
            problems.append(f"segment-{i}-gear-or-steer-mismatch")
        if not feasible(prev, cur, scenario):
            problems.append(f"segment-{i}-in-collision")

    recomputed = path_cost(p.states, scenario, weights)
    for name in ("safety", "comfort", "efficiency", "total"):
        if abs(getattr(recomputed, name) - getattr(p.cost, name)) > 1e-6:
            problems.append(f"cost-{name}-mismatch")
            break

    end = p.states[-1].pose
    tail = dubins.shortest_path(
        (end.x, end.y, end.heading),
        (scenario.goal.x, scenario.goal.y, scenario.goal.heading),
        params.turn_radius,
    )
    if tail is None:
        problems.append("dubins-tail-unsolvable")
        return problems
    if abs(tail.length - p.dubins_length) > 1e-6:
        problems.append("dubins-length-mismatch")
    expected = dubins.sample_path(tail, 0.1)
    expected[:, 2] = (expected[:, 2] + math.pi) % (2.0 * math.pi) - math.pi
    if expected.shape != p.dubins_poses.shape:
        problems.append("dubins-tail-poses-mismatch")
    else:
        pos_ok = np.allclose(expected[:, :2], p.dubins_poses[:, :2], atol=1e-6)
        dh = np.abs((expected[:, 2] - p.dubins_poses[:, 2] + math.pi) % (2.0 * math.pi) - math.pi)
        if not pos_ok or dh.max() > 1e-6:
            problems.append("dubins-tail-poses-mismatch")
    if not poses_clear(p.dubins_poses, scenario):
        problems.append("dubins-tail-in-collision")
    return problems
