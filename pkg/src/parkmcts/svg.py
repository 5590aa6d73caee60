"""Static SVG rendering of scenarios, search effort and planned paths.

Obstacle classes use the result-figure palette (vehicles red, curbs purple,
pillars black); the start box is blue, the goal box yellow, visited nodes are
pale green boxes and the planned path is an orange curve.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .geometry import Pose, footprint_polygon
from .mcts import PlannedPath

if TYPE_CHECKING:
    from .scenarios import Scenario

CLASS_COLORS = {"vehicle": "#d94343", "curb": "#8e5bbd", "pillar": "#1a1a1a"}
START_COLOR = "#3a7bd5"
GOAL_COLOR = "#f0c93d"
VISITED_COLOR = "#bfe6bf"
PATH_COLOR = "#ff8c26"

_SCALE = 30.0  # svg units per metre


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, bounds: tuple[float, float, float, float]):
        self.xmin, self.ymin, self.xmax, self.ymax = bounds
        self.width = (self.xmax - self.xmin) * _SCALE
        self.height = (self.ymax - self.ymin) * _SCALE
        self.parts: list[str] = []

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return (x - self.xmin) * _SCALE, (self.ymax - y) * _SCALE

    def polygon(self, vertices: np.ndarray, fill: str, opacity: float = 1.0, stroke: str = "none") -> None:
        pts = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (self.pt(x, y) for x, y in vertices))
        self.parts.append(
            f'<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity:.2f}" stroke="{stroke}" />'
        )

    def polyline(self, xy: Sequence[tuple[float, float]], color: str, width: float) -> None:
        pts = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (self.pt(x, y) for x, y in xy))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width:.1f}" '
            f'stroke-linecap="round" stroke-linejoin="round" />'
        )

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">\n'
            f'<rect width="{_fmt(self.width)}" height="{_fmt(self.height)}" fill="#fbfbf8" />\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def render_scenario(
    scenario: "Scenario",
    path: Optional[PlannedPath] = None,
    visited_poses: Optional[np.ndarray] = None,
) -> str:
    """Full picture: obstacles, endpoints, optional search footprint and path."""
    canvas = _Canvas(scenario.bounds)
    fp = scenario.vehicle.footprint

    if visited_poses is not None and len(visited_poses):
        for row in visited_poses:
            poly = footprint_polygon(fp, Pose(float(row[0]), float(row[1]), float(row[2])))
            canvas.polygon(poly.vertices, VISITED_COLOR, opacity=0.25)

    for obs in scenario.obstacles:
        canvas.polygon(obs.polygon.vertices, CLASS_COLORS[obs.cls], opacity=0.9)

    canvas.polygon(footprint_polygon(fp, scenario.start.pose).vertices, START_COLOR, opacity=0.85)
    canvas.polygon(footprint_polygon(fp, scenario.goal).vertices, GOAL_COLOR, opacity=0.85)

    if path is not None:
        xy = [(st.pose.x, st.pose.y) for st in path.states]
        xy += [(float(x), float(y)) for x, y, _ in path.dubins_poses]
        canvas.polyline(xy, PATH_COLOR, width=3.0)
    return canvas.render()


def visited_pose_array(nodes) -> np.ndarray:
    """Pose rows of explored tree nodes, for the search-effort underlay."""
    rows = [
        [n.state.pose.x, n.state.pose.y, n.state.pose.heading]
        for n in nodes
        if n.state is not None
    ]
    return np.array(rows) if rows else np.zeros((0, 3))
