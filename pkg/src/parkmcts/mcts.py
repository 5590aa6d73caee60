"""Search tree with prior-guided selection, trimming, and value backup.

Each cycle selects an unexplored node by repeatedly maximizing

    Q(n, a) + c_puct * P(n, a) * sqrt((N(n) + 1) / (N(n, a) + 1))

expands it into one child per action (infeasible children are trimmed at
birth and their prior mass is split evenly among the survivors), scores it by
blending the evaluator value with the accumulated path cost, and backs the
result up to the root, keeping the best estimate whenever a node already
connects to the destination.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Optional

import numpy as np

from . import dubins
from .costs import CostWeights, PathCost, clearance_below, clearance_below_batch, node_value
from .geometry import Pose, fast_pose
from .vehicle import (
    Action,
    ActionSet,
    GEAR_FORWARD,
    MotionState,
    dubins_connects,
    probe_actions,
    state_in_collision,
    transition,
)

if TYPE_CHECKING:
    from .scenarios import Scenario

# deterministic time proxy used by benchmark outputs: one created node = 1 ms
VIRTUAL_MS_PER_NODE = 1.0


class NodeStatus(IntEnum):
    UNEXPLORED = 0
    EXPLORED = 1
    TRIMMED = 2


class TreeExhausted(RuntimeError):
    """Every reachable branch is trimmed; the tree is fully expanded."""


class NodeLimitReached(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    c_puct: float = 1.5
    node_limit: int = 20_000
    time_limit_ms: Optional[float] = None
    path_target: int = 1
    max_depth: int = 30
    action_set: ActionSet | None = None  # filled from the scenario vehicle if None

    def __post_init__(self) -> None:
        if self.node_limit <= 0 or self.max_depth <= 0 or self.path_target <= 0:
            raise ValueError("limits must be positive")
        if self.time_limit_ms is not None and self.time_limit_ms <= 0:
            raise ValueError("time limit must be positive")


class TreeNode:
    __slots__ = (
        "node_id",
        "state",
        "status",
        "parent",
        "action_index",
        "depth",
        "children",
        "priors",
        "q_values",
        "edge_visits",
        "alive",
        "visit_count",
        "stored_value",
        "eval_value",
        "dest_connected",
        "dest_connect_length",
        "cum_safety",
        "cum_comfort",
        "cum_efficiency",
    )

    def __init__(self, node_id: int, state: MotionState, parent: Optional["TreeNode"], action_index: int):
        self.node_id = node_id
        self.state = state
        self.status = NodeStatus.UNEXPLORED
        self.parent = parent
        self.action_index = action_index
        self.depth = 0 if parent is None else parent.depth + 1
        self.children: list[Optional[TreeNode]] = []
        self.priors: np.ndarray | None = None
        self.q_values: np.ndarray | None = None
        self.edge_visits: np.ndarray | None = None
        self.alive: np.ndarray | None = None  # per-action: child exists and is not trimmed
        self.visit_count = 0
        self.stored_value = 0.0
        self.eval_value = 0.5
        self.dest_connected = False
        self.dest_connect_length: Optional[float] = None
        self.cum_safety = 0.0
        self.cum_comfort = 0.0
        self.cum_efficiency = 0.0

    def path_cost(self) -> PathCost:
        return PathCost.from_components(self.cum_safety, self.cum_comfort, self.cum_efficiency)

    def living_mask(self) -> np.ndarray:
        if self.alive is not None:
            return self.alive
        return np.array([c is not None and c.status != NodeStatus.TRIMMED for c in self.children])

    def chain_states(self) -> list[MotionState]:
        states = []
        node: Optional[TreeNode] = self
        while node is not None:
            states.append(node.state)
            node = node.parent
        states.reverse()
        return states


@dataclass
class SearchTree:
    root: TreeNode
    destination: Pose
    config: SearchConfig
    node_count: int = 1
    paths_found: int = 0
    nodes: list[TreeNode] = field(default_factory=list)
    dest_nodes: list[TreeNode] = field(default_factory=list)
    exhausted: bool = False
    nodes_to_first_path: Optional[int] = None
    cycles: int = 0


@dataclass
class PlannedPath:
    """Tree segment plus the closing direct connection to the goal."""

    states: list[MotionState]
    actions: list[Action]
    dubins_poses: np.ndarray  # (m, 3) sampled tail, starts at the last tree pose
    dubins_length: float
    cost: PathCost

    @property
    def tree_length(self) -> float:
        return sum(abs(a.distance) for a in self.actions)

    @property
    def total_length(self) -> float:
        return self.tree_length + self.dubins_length


@dataclass
class SearchResult:
    tree: SearchTree
    termination: str  # exhausted | node_limit | time_limit | path_target
    wall_ms: float
    nodes_created: int
    nodes_to_first_path: Optional[int]
    best_path: Optional[PlannedPath]

    @property
    def virtual_ms(self) -> float:
        """Deterministic machine-independent time proxy for benchmark output."""
        return self.nodes_created * VIRTUAL_MS_PER_NODE

    @property
    def success(self) -> bool:
        return self.best_path is not None


class Search:
    """One tree search over a scenario with a fixed evaluator snapshot."""

    def __init__(
        self,
        scenario: "Scenario",
        evaluator,
        config: SearchConfig,
        weights: CostWeights | None = None,
    ):
        from dataclasses import replace

        from .vehicle import make_action_set

        self.scenario = scenario
        self.evaluator = evaluator
        self.weights = weights if weights is not None else CostWeights()
        if config.action_set is None:
            config = replace(config, action_set=make_action_set(scenario.vehicle))
        self.config = config
        self.actions = config.action_set

        if state_in_collision(scenario.start, scenario):
            raise ValueError("start pose is in collision or out of bounds")
        goal_state = MotionState(pose=scenario.goal, gear=GEAR_FORWARD, steer=0.0)
        if state_in_collision(goal_state, scenario):
            raise ValueError("destination pose is in collision or out of bounds")

        root = TreeNode(0, scenario.start, None, -1)
        hinge = self.weights.safety_threshold - clearance_below(
            scenario.start, scenario, self.weights.safety_threshold
        )
        root.cum_safety = -self.weights.w_safety * hinge
        self.tree = SearchTree(root=root, destination=scenario.goal, config=self.config)
        # the root is expanded immediately so every cycle starts with a descent
        try:
            self.expand(root)
        except NodeLimitReached:
            return
        v = self.simulate(root)
        self.backpropagate(root, v)

    # -- cycle steps ------------------------------------------------------

    def select(self) -> TreeNode:
        """Descend from the root to the first unexplored node."""
        node = self.tree.root
        if self.tree.exhausted or node.status == NodeStatus.TRIMMED:
            raise TreeExhausted("all branches below the root are trimmed")
        c_puct = self.config.c_puct
        while node.status == NodeStatus.EXPLORED:
            q = node.q_values
            ne = node.edge_visits
            scores = q + c_puct * node.priors * np.sqrt((node.visit_count + 1.0) / (ne + 1.0))
            alive = node.living_mask()
            if not alive.any():
                raise TreeExhausted("explored node with no living children")
            scores = np.where(alive, scores, -np.inf)
            best = int(np.argmax(scores))  # first maximum: lowest action index wins ties
            child = node.children[best]
            assert child is not None and child.status != NodeStatus.TRIMMED
            node = child
        return node

    def expand(self, node: TreeNode) -> None:
        """Spawn one child per action; trim infeasible ones and renormalize priors."""
        if node.status != NodeStatus.UNEXPLORED:
            raise ValueError("only unexplored nodes can be expanded")
        if self.tree.node_count >= self.config.node_limit:
            raise NodeLimitReached(f"node limit {self.config.node_limit} reached")
        n_actions = len(self.actions)
        priors, value = self.evaluator.evaluate(self.scenario, node.state, self._parent_pose(node))
        priors = np.asarray(priors, dtype=np.float64).copy()
        node.eval_value = float(value)
        node.status = NodeStatus.EXPLORED
        node.q_values = np.zeros(n_actions)
        node.edge_visits = np.zeros(n_actions, dtype=np.int64)

        allow_children = node.depth < self.config.max_depth
        if allow_children:
            ok, end_poses = probe_actions(node.state, self.actions, self.scenario)
        else:
            ok, end_poses = np.zeros(n_actions, dtype=bool), None
        children: list[Optional[TreeNode]] = []
        for idx, action in enumerate(self.actions.actions):
            if end_poses is not None:
                pose = fast_pose(float(end_poses[idx, 0]), float(end_poses[idx, 1]), float(end_poses[idx, 2]))
                child_state = MotionState(pose=pose, gear=action.gear, steer=action.steer)
            else:
                child_state = transition(node.state, action, self.scenario.vehicle)
            child = TreeNode(self.tree.node_count, child_state, node, idx)
            self.tree.node_count += 1
            self.tree.nodes.append(child)
            if not ok[idx]:
                child.status = NodeStatus.TRIMMED
            children.append(child)
        node.children = children
        node.alive = ok.copy()
        self._accumulate_costs(node, ok)

        if not ok.any():
            node.priors = np.zeros(n_actions)
            self._trim(node)
            return
        trimmed_mass = float(priors[~ok].sum())
        priors[~ok] = 0.0
        priors[ok] += trimmed_mass / int(ok.sum())
        node.priors = priors

    def simulate(self, node: TreeNode) -> float:
        """Blend the evaluator value with the root-to-node cost; check the goal."""
        cost = node.path_cost()
        value = node_value(node.eval_value, cost, self.weights)
        length = dubins_connects(node.state.pose, self.tree.destination, self.scenario.vehicle, self.scenario)
        if length is not None:
            node.dest_connected = True
            node.dest_connect_length = length
            self.tree.paths_found += 1
            self.tree.dest_nodes.append(node)
            if self.tree.nodes_to_first_path is None:
                self.tree.nodes_to_first_path = self.tree.node_count
        return value

    def backpropagate(self, node: TreeNode, value: float) -> None:
        node.stored_value = value
        while node is not self.tree.root:
            if node.dest_connected:
                value = max(value, node.stored_value)
            parent = node.parent
            a = node.action_index
            parent.q_values[a] = (parent.edge_visits[a] * parent.q_values[a] + value) / (parent.edge_visits[a] + 1)
            parent.edge_visits[a] += 1
            parent.visit_count += 1
            node = parent

    def step(self) -> bool:
        """One selection/expansion/simulation/backpropagation cycle.

        Returns False when the expansion trimmed the whole branch, in which
        case nothing was scored or backed up and the cycle does not count.
        """
        node = self.select()
        self.expand(node)
        if node.status == NodeStatus.TRIMMED:
            return False
        value = self.simulate(node)
        self.backpropagate(node, value)
        self.tree.cycles += 1
        return True

    # -- driving loop ------------------------------------------------------

    def run(self) -> SearchResult:
        start = time.perf_counter()
        termination = None
        deadline = None
        if self.config.time_limit_ms is not None:
            deadline = start + self.config.time_limit_ms / 1000.0
        while True:
            if self.tree.paths_found >= self.config.path_target:
                termination = "path_target"
                break
            if self.tree.exhausted:
                termination = "exhausted"
                break
            if self.tree.node_count >= self.config.node_limit:
                termination = "node_limit"
                break
            if deadline is not None and time.perf_counter() >= deadline:
                termination = "time_limit"
                break
            try:
                self.step()
            except TreeExhausted:
                termination = "exhausted"
                break
            except NodeLimitReached:
                termination = "node_limit"
                break
        wall_ms = (time.perf_counter() - start) * 1000.0
        return SearchResult(
            tree=self.tree,
            termination=termination,
            wall_ms=wall_ms,
            nodes_created=self.tree.node_count,
            nodes_to_first_path=self.tree.nodes_to_first_path,
            best_path=extract_best_path(self.tree, self.scenario, self.weights),
        )

    # -- internals ---------------------------------------------------------

    def _parent_pose(self, node: TreeNode) -> Pose:
        return node.parent.state.pose if node.parent is not None else node.state.pose

    def _accumulate_costs(self, node: TreeNode, ok: np.ndarray) -> None:
        """Extend the parent's running cost components to the live children."""
        if not ok.any():
            return
        w = self.weights
        idx = np.nonzero(ok)[0]
        poses = np.array(
            [
                [node.children[i].state.pose.x, node.children[i].state.pose.y, node.children[i].state.pose.heading]
                for i in idx
            ]
        )
        clear = clearance_below_batch(poses, self.scenario, w.safety_threshold)
        for j, i in enumerate(idx):
            child = node.children[i]
            child.cum_safety = node.cum_safety - w.w_safety * (w.safety_threshold - float(clear[j]))
            comfort = 0.0
            if child.state.gear != node.state.gear:
                comfort -= w.w_gear
            comfort -= w.w_steer * abs(child.state.steer - node.state.steer)
            child.cum_comfort = node.cum_comfort + comfort
            action = self.actions.actions[child.action_index]
            child.cum_efficiency = node.cum_efficiency - w.w_dist * abs(action.distance)

    def _trim(self, node: TreeNode) -> None:
        """Mark a node dead and propagate trimming/prior mass up the tree."""
        node.status = NodeStatus.TRIMMED
        parent = node.parent
        if parent is None:
            self.tree.exhausted = True
            return
        parent.alive[node.action_index] = False
        share = float(parent.priors[node.action_index])
        parent.priors[node.action_index] = 0.0
        alive = parent.alive
        if alive.any():
            parent.priors[alive] += share / int(alive.sum())
        else:
            self._trim(parent)


def run_search(
    scenario: "Scenario",
    evaluator,
    config: SearchConfig,
    weights: CostWeights | None = None,
) -> SearchResult:
    return Search(scenario, evaluator, config, weights).run()


def extract_best_path(tree: SearchTree, scenario: "Scenario", weights: CostWeights) -> Optional[PlannedPath]:
    """Best destination-connected node's path plus its closing segment."""
    if not tree.dest_nodes:
        return None
    w_dist = weights.w_dist

    def score(node: TreeNode) -> float:
        return node_value(1.0, node.path_cost(), weights) - w_dist * node.dest_connect_length

    best = max(tree.dest_nodes, key=lambda n: (score(n), -n.node_id))
    states = best.chain_states()
    action_set = tree.config.action_set
    actions = []
    node = best
    while node.parent is not None:
        actions.append(action_set.actions[node.action_index])
        node = node.parent
    actions.reverse()
    path = dubins.shortest_path(
        (best.state.pose.x, best.state.pose.y, best.state.pose.heading),
        (tree.destination.x, tree.destination.y, tree.destination.heading),
        scenario.vehicle.turn_radius,
    )
    poses = dubins.sample_path(path, 0.1)
    poses[:, 2] = (poses[:, 2] + math.pi) % (2.0 * math.pi) - math.pi
    return PlannedPath(
        states=states,
        actions=actions,
        dubins_poses=poses,
        dubins_length=best.dest_connect_length,
        cost=best.path_cost(),
    )


def dump_tree(tree: SearchTree) -> str:
    """One line per node: id, parent id, action index, status, N, Q, V, dest."""
    lines = []
    all_nodes = [tree.root] + tree.nodes
    for node in sorted(all_nodes, key=lambda n: n.node_id):
        parent = node.parent
        q_in = 0.0 if parent is None else float(parent.q_values[node.action_index])
        lines.append(
            f"{node.node_id} {(-1 if parent is None else parent.node_id)} {node.action_index} "
            f"{node.status.name} {node.visit_count} {q_in:.9g} {node.stored_value:.9g} "
            f"{int(node.dest_connected)}"
        )
    return "\n".join(lines) + "\n"
