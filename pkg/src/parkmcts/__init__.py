"""Learning-guided tree search for automated parking, with a Hybrid A* baseline."""

from .costs import CostWeights, PathCost, node_value, path_cost, terminal_reward
from .geometry import (
    ConvexPolygon,
    OccupancyGrid,
    Point2,
    Pose,
    VehicleFootprint,
    footprint_polygon,
    min_clearance,
    polygons_intersect,
    rasterize,
    wrap_angle,
)
from .mcts import (
    NodeStatus,
    PlannedPath,
    Search,
    SearchConfig,
    SearchResult,
    SearchTree,
    TreeNode,
    run_search,
)
from .scenarios import GenSpec, Scenario, generate, read_scenario, validate, write_scenario
from .vehicle import (
    Action,
    ActionSet,
    GEAR_FORWARD,
    GEAR_REVERSE,
    MotionState,
    VehicleParams,
    dubins_connects,
    feasible,
    make_action_set,
    transition,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionSet",
    "ConvexPolygon",
    "CostWeights",
    "GEAR_FORWARD",
    "GEAR_REVERSE",
    "GenSpec",
    "MotionState",
    "NodeStatus",
    "OccupancyGrid",
    "PathCost",
    "PlannedPath",
    "Point2",
    "Pose",
    "Scenario",
    "Search",
    "SearchConfig",
    "SearchResult",
    "SearchTree",
    "TreeNode",
    "VehicleFootprint",
    "VehicleParams",
    "dubins_connects",
    "feasible",
    "footprint_polygon",
    "generate",
    "make_action_set",
    "min_clearance",
    "node_value",
    "path_cost",
    "polygons_intersect",
    "rasterize",
    "read_scenario",
    "run_search",
    "terminal_reward",
    "transition",
    "validate",
    "wrap_angle",
    "write_scenario",
]
