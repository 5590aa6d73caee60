"""State tensor encoding for the policy/value network.

Eight 64x64 channels: three obstacle-class occupancy layers, body occupancy
at the current / parent / destination poses, and two constant numeric layers
for gear and normalized steer.  Static channels are rasterized once per
scenario and reused for every node.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .geometry import Point2, Pose, footprint_polygon, rasterize
from .scenarios import OBSTACLE_CLASSES
from .vehicle import MotionState

if TYPE_CHECKING:
    from .mcts import TreeNode
    from .scenarios import Scenario

GRID_SIZE = 64
CHANNELS = 8  # 3 obstacle classes + current/parent/destination bodies + gear + steer


class ScenarioEncoder:
    """Caches the scenario-constant channels and rasterizes per-node bodies."""

    def __init__(self, scenario: "Scenario"):
        self.scenario = scenario
        xmin, ymin, xmax, ymax = scenario.bounds
        self.origin = Point2(xmin, ymin)
        self.resolution = max(xmax - xmin, ymax - ymin) / GRID_SIZE
        static = np.zeros((4, GRID_SIZE, GRID_SIZE), dtype=np.float32)
        for ci, cls in enumerate(OBSTACLE_CLASSES):
            polys = [o.polygon for o in scenario.obstacles if o.cls == cls]
            if polys:
                grid = rasterize(polys, self.origin, self.resolution, GRID_SIZE, GRID_SIZE)
                static[ci] = grid.cells
        static[3] = self._body_layer(scenario.goal)
        self._static = static
        self._max_steer = scenario.vehicle.max_steer

    def _body_layer(self, pose: Pose) -> np.ndarray:
        poly = footprint_polygon(self.scenario.vehicle.footprint, pose)
        grid = rasterize([poly], self.origin, self.resolution, GRID_SIZE, GRID_SIZE)
        return grid.cells.astype(np.float32)

    def encode(self, state: MotionState, parent_pose: Pose) -> np.ndarray:
        out = np.empty((CHANNELS, GRID_SIZE, GRID_SIZE), dtype=np.float32)
        out[0:3] = self._static[0:3]
        out[3] = self._body_layer(state.pose)
        out[4] = self._body_layer(parent_pose)
        out[5] = self._static[3]
        out[6] = float(state.gear)
        out[7] = state.steer / self._max_steer
        return out


def encode_state(node: "TreeNode", scenario: "Scenario", encoder: ScenarioEncoder | None = None) -> np.ndarray:
    """Tensor for a tree node; the root uses its own pose as the parent layer."""
    if encoder is None:
        encoder = ScenarioEncoder(scenario)
    parent_pose = node.parent.state.pose if node.parent is not None else node.state.pose
    return encoder.encode(node.state, parent_pose)
