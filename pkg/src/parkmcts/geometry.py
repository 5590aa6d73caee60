"""Planar primitives: poses, convex polygons, footprints, grids.

Everything here is a pure function on immutable data.  Obstacles and vehicle
bodies are convex polygons; collision is decided with the separating-axis
test, and boundary contact counts as a collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class CollisionStateError(ValueError):
    """Raised when an operation that assumes clearance sees a collision."""


def wrap_angle(a: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Pose:
    """Rear-axle position plus heading, heading kept in [-pi, pi)."""

    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError("pose coordinates must be finite")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> Point2:
        return Point2(self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading], dtype=np.float64)


def fast_pose(x: float, y: float, heading: float) -> Pose:
    """Pose constructor for hot paths; caller guarantees finite inputs."""
    pose = object.__new__(Pose)
    object.__setattr__(pose, "x", x)
    object.__setattr__(pose, "y", y)
    object.__setattr__(pose, "heading", (heading + math.pi) % TWO_PI - math.pi)
    return pose


class ConvexPolygon:
    """Strictly convex polygon with counterclockwise vertex order.

    Vertices are stored as an (n, 2) float array; edges, normals and the
    polygon's own axis projections are precomputed because the
    separating-axis test reuses them constantly.
    """

    __slots__ = ("vertices", "edges", "normals", "_own_min", "_own_max", "_aabb")

    def __init__(self, vertices: Iterable[Sequence[float]]):
        verts = np.asarray(list(vertices), dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise ValueError("polygon needs at least 3 (x, y) vertices")
        if not np.isfinite(verts).all():
            raise ValueError("polygon vertices must be finite")
        edges = np.roll(verts, -1, axis=0) - verts
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross <= 0.0):
            raise ValueError("polygon must be strictly convex with counterclockwise winding")
        self.vertices = verts
        self.edges = edges
        # outward normals, one per edge
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        lengths = np.linalg.norm(normals, axis=1)
        self.normals = normals / lengths[:, None]
        own_proj = verts @ self.normals.T  # (n_verts, n_axes)
        self._own_min = own_proj.min(axis=0)
        self._own_max = own_proj.max(axis=0)
        mins = verts.min(axis=0)
        maxs = verts.max(axis=0)
        self._aabb = (float(mins[0]), float(mins[1]), float(maxs[0]), float(maxs[1]))

    def __len__(self) -> int:
        return len(self.vertices)

    def area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]))

    def aabb(self) -> tuple[float, float, float, float]:
        return self._aabb

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        """Vectorized membership test; boundary points count as inside."""
        pts = np.asarray(points, dtype=np.float64)
        rel = pts[:, None, :] - self.vertices[None, :, :]
        cross = self.edges[None, :, 0] * rel[:, :, 1] - self.edges[None, :, 1] * rel[:, :, 0]
        return np.all(cross >= 0.0, axis=1)


@dataclass(frozen=True)
class VehicleFootprint:
    """Rectangular collision body referenced to the rear axle."""

    length: float
    width: float
    rear_overhang: float

    def __post_init__(self) -> None:
        if self.length <= 0 or self.width <= 0:
            raise ValueError("footprint length and width must be positive")
        if not (0 <= self.rear_overhang < self.length):
            raise ValueError("rear_overhang must lie in [0, length)")

    def local_corners(self) -> np.ndarray:
        """Body corners in the rear-axle frame, counterclockwise."""
        xb = -self.rear_overhang
        xf = self.length - self.rear_overhang
        hw = 0.5 * self.width
        return np.array([[xb, -hw], [xf, -hw], [xf, hw], [xb, hw]], dtype=np.float64)


@dataclass
class OccupancyGrid:
    """One binary occupancy layer on a regular grid."""

    origin: Point2
    resolution: float
    width: int
    height: int
    cells: np.ndarray  # bool, shape (height, width), row index is the y axis

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells.shape != (self.height, self.width):
            raise ValueError("cell array shape does not match width/height")

    def occupied_count(self) -> int:
        return int(self.cells.sum())


def footprint_polygon(footprint: VehicleFootprint, pose: Pose) -> ConvexPolygon:
    """Oriented body rectangle at a pose (rear axle at the pose position)."""
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    local = footprint.local_corners()
    rot = np.array([[c, -s], [s, c]])
    return ConvexPolygon(local @ rot.T + np.array([pose.x, pose.y]))


def footprint_corners_batch(footprint: VehicleFootprint, poses: np.ndarray) -> np.ndarray:
    """Corners of the body at many poses at once.

    poses: (m, 3) rows of x, y, heading.  Returns (m, 4, 2).
    """
    local = footprint.local_corners()  # (4, 2)
    c = np.cos(poses[:, 2])
    s = np.sin(poses[:, 2])
    x = local[None, :, 0] * c[:, None] - local[None, :, 1] * s[:, None] + poses[:, 0:1]
    y = local[None, :, 0] * s[:, None] + local[None, :, 1] * c[:, None] + poses[:, 1:2]
    return np.stack([x, y], axis=2)


def polygons_intersect(a: ConvexPolygon, b: ConvexPolygon) -> bool:
    """Separating-axis test; touching boundaries count as intersecting."""
    for first, second in ((a, b), (b, a)):
        proj_other = second.vertices @ first.normals.T
        if np.any(proj_other.max(axis=0) < first._own_min) or np.any(proj_other.min(axis=0) > first._own_max):
            return False
    return True


def boxes_intersect_polygon(corners: np.ndarray, poly: ConvexPolygon, headings: np.ndarray) -> np.ndarray:
    """Separating-axis test between many oriented boxes and one polygon.

    corners: (m, 4, 2) box corners; headings: (m,) box headings (the boxes'
    edge normals are the heading direction and its perpendicular).
    Returns a boolean (m,) hit mask; boundary contact is a hit.
    """
    # polygon's axes
    proj_box = np.einsum("mkc,ac->mka", corners, poly.normals)  # (m, 4, n_axes)
    box_min = proj_box.min(axis=1)
    box_max = proj_box.max(axis=1)
    separated = np.any((box_max < poly._own_min[None, :]) | (box_min > poly._own_max[None, :]), axis=1)

    # box axes: heading direction and its normal
    c = np.cos(headings)
    s = np.sin(headings)
    axes = np.stack([np.stack([c, s], axis=1), np.stack([-s, c], axis=1)], axis=1)  # (m, 2, 2)
    proj_box2 = np.einsum("mkc,mac->mka", corners, axes)  # (m, 4, 2)
    proj_poly2 = np.einsum("vc,mac->mva", poly.vertices, axes)  # (m, n_verts, 2)
    b2_min, b2_max = proj_box2.min(axis=1), proj_box2.max(axis=1)
    p2_min, p2_max = proj_poly2.min(axis=1), proj_poly2.max(axis=1)
    separated |= np.any((b2_max < p2_min) | (b2_min > p2_max), axis=1)
    return ~separated


def boxes_polygon_distance(corners: np.ndarray, poly: ConvexPolygon) -> np.ndarray:
    """Boundary distance between many boxes and one polygon; (m,) array.

    Only valid for non-intersecting pairs (the minimum over boundary pairs
    of an overlapping pair is not zero).
    """
    m = corners.shape[0]
    box_a = corners  # (m, 4, 2)
    box_b = np.roll(corners, -1, axis=1)
    d = box_b - box_a
    # box segments vs polygon vertices
    rel = poly.vertices[None, None, :, :] - box_a[:, :, None, :]  # (m, 4, k, 2)
    denom = np.einsum("msc,msc->ms", d, d)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.einsum("mskc,msc->msk", rel, d) / denom[:, :, None]
    np.clip(t, 0.0, 1.0, out=t)
    closest = box_a[:, :, None, :] + t[..., None] * d[:, :, None, :]
    diff = poly.vertices[None, None, :, :] - closest
    d1 = np.sqrt(np.einsum("mskc,mskc->msk", diff, diff)).reshape(m, -1).min(axis=1)
    # polygon segments vs box corners
    pa = poly.vertices  # (k, 2)
    pd = poly.edges
    rel2 = corners[:, None, :, :] - pa[None, :, None, :]  # (m, k, 4, 2)
    denom2 = np.einsum("kc,kc->k", pd, pd)
    denom2 = np.where(denom2 == 0.0, 1.0, denom2)
    t2 = np.einsum("mkpc,kc->mkp", rel2, pd) / denom2[None, :, None]
    np.clip(t2, 0.0, 1.0, out=t2)
    closest2 = pa[None, :, None, :] + t2[..., None] * pd[None, :, None, :]
    diff2 = corners[:, None, :, :] - closest2
    d2 = np.sqrt(np.einsum("mkpc,mkpc->mkp", diff2, diff2)).reshape(m, -1).min(axis=1)
    return np.minimum(d1, d2)


def rasterize(
    polygons: Sequence[ConvexPolygon],
    origin: Point2,
    resolution: float,
    width: int,
    height: int,
) -> OccupancyGrid:
    """Mark cells whose center lies inside or on any polygon."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    cells = np.zeros((height, width), dtype=bool)
    if polygons:
        xs = origin.x + (np.arange(width) + 0.5) * resolution
        ys = origin.y + (np.arange(height) + 0.5) * resolution
        for poly in polygons:
            xmin, ymin, xmax, ymax = poly.aabb()
            i0 = max(0, int(math.floor((xmin - origin.x) / resolution - 0.5)))
            i1 = min(width, int(math.ceil((xmax - origin.x) / resolution + 0.5)))
            j0 = max(0, int(math.floor((ymin - origin.y) / resolution - 0.5)))
            j1 = min(height, int(math.ceil((ymax - origin.y) / resolution + 0.5)))
            if i0 >= i1 or j0 >= j1:
                continue
            gx, gy = np.meshgrid(xs[i0:i1], ys[j0:j1])
            pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
            inside = poly.contains_points(pts).reshape(gy.shape)
            cells[j0:j1, i0:i1] |= inside
    return OccupancyGrid(origin=origin, resolution=resolution, width=width, height=height, cells=cells)


def _segment_point_distances(seg_a: np.ndarray, seg_b: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Distances between each segment (a_i, b_i) and each point; (n_seg, n_pts)."""
    d = seg_b - seg_a  # (n_seg, 2)
    rel = points[None, :, :] - seg_a[:, None, :]  # (n_seg, n_pts, 2)
    denom = np.einsum("sc,sc->s", d, d)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.clip(np.einsum("spc,sc->sp", rel, d) / denom[:, None], 0.0, 1.0)
    closest = seg_a[:, None, :] + t[:, :, None] * d[:, None, :]
    return np.linalg.norm(points[None, :, :] - closest, axis=2)


def polygon_distance(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Minimum boundary distance between two convex polygons (0 on contact)."""
    if polygons_intersect(a, b):
        return 0.0
    av, bv = a.vertices, b.vertices
    a2 = np.roll(av, -1, axis=0)
    b2 = np.roll(bv, -1, axis=0)
    d1 = _segment_point_distances(av, a2, bv).min()
    d2 = _segment_point_distances(bv, b2, av).min()
    return float(min(d1, d2))


def min_clearance(poly: ConvexPolygon, obstacles: Sequence[ConvexPolygon]) -> float:
    """Smallest distance from poly to any obstacle boundary; inf when none."""
    best = math.inf
    for obs in obstacles:
        if polygons_intersect(poly, obs):
            raise CollisionStateError("polygon is in collision with an obstacle")
        best = min(best, polygon_distance(poly, obs))
    return best
