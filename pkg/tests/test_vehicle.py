import math

import numpy as np
import pytest

import parkmcts.dubins as dubins
from parkmcts.geometry import Pose
from parkmcts.vehicle import (
    Action,
    GEAR_FORWARD,
    GEAR_REVERSE,
    MotionState,
    arc_poses,
    dubins_connects,
    feasible,
    feasible_actions,
    make_action_set,
    transition,
)

from .conftest import add_obstacle, make_empty_scenario, square


def state(x, y, h, gear=GEAR_FORWARD, steer=0.0):
    return MotionState(pose=Pose(x, y, h), gear=gear, steer=steer)


class TestTransition:
    def test_straight_forward(self, vehicle):
        nxt = transition(state(0, 0, 0), Action(1.0, 0.0), vehicle)
        assert (nxt.pose.x, nxt.pose.y, nxt.pose.heading) == (1.0, 0.0, 0.0)
        assert nxt.gear == GEAR_FORWARD

    def test_straight_reverse(self, vehicle):
        nxt = transition(state(0, 0, 0), Action(-1.0, 0.0), vehicle)
        assert (nxt.pose.x, nxt.pose.y, nxt.pose.heading) == (-1.0, 0.0, 0.0)
        assert nxt.gear == GEAR_REVERSE

    def test_heading_update(self, vehicle):
        # tan(steer) = 0.5 so the heading advances d * 0.5 / L = 0.1
        steer = math.atan(0.5)
        nxt = transition(state(0, 0, 0), Action(0.5, steer), vehicle)
        assert nxt.pose.x == pytest.approx(0.5)
        assert nxt.pose.y == pytest.approx(0.0)
        assert nxt.pose.heading == pytest.approx(0.1)
        assert nxt.steer == steer

    def test_straight_reversibility_exact(self, vehicle):
        # dyadic coordinates and distances at heading zero (where cos and sin
        # are exact): forward then reverse must restore the pose bit-for-bit
        for k in range(64):
            x = (k - 32) / 32.0
            y = (k * 7 % 64 - 32) / 16.0
            for d in (0.5, 0.25, 1.0, 1.75, -0.75):
                s0 = state(x, y, 0.0)
                fwd = transition(s0, Action(d, 0.0), vehicle)
                back = transition(fwd, Action(-d, 0.0), vehicle)
                assert back.pose.x == s0.pose.x
                assert back.pose.y == s0.pose.y
                assert back.pose.heading == s0.pose.heading

    def test_straight_reversibility_any_heading(self, vehicle):
        rng = np.random.default_rng(0)
        for _ in range(500):
            s0 = state(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-math.pi, math.pi))
            d = rng.uniform(0.1, 2.0)
            back = transition(transition(s0, Action(d, 0.0), vehicle), Action(-d, 0.0), vehicle)
            assert back.pose.x == pytest.approx(s0.pose.x, abs=1e-12)
            assert back.pose.y == pytest.approx(s0.pose.y, abs=1e-12)

    def test_heading_always_wrapped(self, vehicle):
        rng = np.random.default_rng(1)
        s = state(0, 0, 0)
        for _ in range(1000):
            action = Action(float(rng.uniform(-2, 2) or 0.5), float(rng.uniform(-0.6, 0.6)))
            s = transition(s, action, vehicle)
            assert -math.pi <= s.pose.heading < math.pi

    def test_euler_converges_to_circle(self, vehicle):
        # quarter circle at 0.01 m steps stays within 1 cm of the closed form
        steer = 0.4
        radius = vehicle.wheelbase / math.tan(steer)
        arc = radius * math.pi / 2
        n = int(math.ceil(arc / 0.01))
        s = state(0, 0, 0, steer=steer)
        for _ in range(n):
            s = transition(s, Action(arc / n, steer), vehicle)
        expect = (radius * math.sin(math.pi / 2), radius * (1 - math.cos(math.pi / 2)))
        err = math.hypot(s.pose.x - expect[0], s.pose.y - expect[1])
        assert err < 0.01


class TestActionSet:
    def test_three_steer_levels(self, vehicle):
        aset = make_action_set(vehicle, steer_count=3, step=0.8)
        got = [(a.distance, a.steer) for a in aset.actions]
        assert got == [
            (0.8, -0.6),
            (0.8, 0.0),
            (0.8, 0.6),
            (-0.8, -0.6),
            (-0.8, 0.0),
            (-0.8, 0.6),
        ]

    def test_five_steer_levels(self, vehicle):
        aset = make_action_set(vehicle, steer_count=5, step=0.8)
        steers = sorted({a.steer for a in aset.actions})
        assert steers == pytest.approx([-0.6, -0.3, 0.0, 0.3, 0.6])

    def test_even_count_rejected(self, vehicle):
        with pytest.raises(ValueError):
            make_action_set(vehicle, steer_count=4)

    def test_zero_distance_rejected(self):
        with pytest.raises(ValueError):
            Action(0.0, 0.1)


class TestFeasible:
    def test_straight_in_empty_lot(self, vehicle):
        scn = make_empty_scenario()
        s0 = scn.start
        s1 = transition(s0, Action(1.0, 0.0), vehicle)
        assert feasible(s0, s1, scn)

    def test_endpoint_in_obstacle(self, vehicle):
        scn = make_empty_scenario()
        add_obstacle(scn, square(7.0, 10.0, 0.6))
        s0 = scn.start  # at (5, 10)
        s1 = transition(s0, Action(1.0, 0.0), vehicle)  # body reaches x in [3, 9]
        assert not feasible(s0, s1, scn)

    def test_midpoint_corner_clip(self, vehicle):
        # an obstacle that touches only the mid-motion swept area (tail swing
        # of a max-steer turn): endpoint checks pass, the interpolated check
        # must fail.  The probe point is found with a 0.01 m sampling oracle.
        from parkmcts.geometry import footprint_polygon
        from parkmcts.vehicle import arc_poses, state_in_collision

        s0 = state(5.0, 10.0, 0.0)
        action = Action(0.8, 0.6)
        s1 = transition(s0, action, vehicle)
        fp = vehicle.footprint
        end_a = footprint_polygon(fp, s0.pose)
        end_b = footprint_polygon(fp, s1.pose)
        dense = arc_poses(s0.pose, action.distance, action.steer, vehicle, step=0.01)
        mid_quads = [footprint_polygon(fp, Pose(*row)) for row in dense[20:-20]]

        xs = np.linspace(3.0, 10.0, 260)
        ys = np.linspace(7.5, 12.5, 200)
        gx, gy = np.meshgrid(xs, ys)
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        in_mid = np.zeros(len(pts), dtype=bool)
        for quad in mid_quads[:: max(1, len(mid_quads) // 20)]:
            in_mid |= quad.contains_points(pts)
        in_ends = end_a.contains_points(pts) | end_b.contains_points(pts)
        only_mid = pts[in_mid & ~in_ends]
        assert len(only_mid), "oracle found no mid-swept-only region"
        # pick the probe farthest from both endpoint bodies
        from parkmcts.geometry import polygon_distance

        probe = max(
            (tuple(p) for p in only_mid[:: max(1, len(only_mid) // 50)]),
            key=lambda p: min(
                polygon_distance(square(p[0], p[1], 0.02), end_a),
                polygon_distance(square(p[0], p[1], 0.02), end_b),
            ),
        )
        scn = make_empty_scenario(start=(5.0, 10.0, 0.0))
        add_obstacle(scn, square(probe[0], probe[1], 0.02))
        assert not state_in_collision(s0, scn)
        assert not state_in_collision(s1, scn)
        assert not feasible(s0, s1, scn)

    def test_monotone_in_obstacles(self, vehicle):
        rng = np.random.default_rng(2)
        scn_free = make_empty_scenario()
        for _ in range(100):
            s0 = state(rng.uniform(4, 16), rng.uniform(4, 16), rng.uniform(-math.pi, math.pi))
            action = Action(float(rng.choice([-0.8, 0.8])), float(rng.uniform(-0.6, 0.6)))
            s1 = transition(s0, action, vehicle)
            scn_more = make_empty_scenario()
            add_obstacle(scn_more, square(rng.uniform(2, 18), rng.uniform(2, 18), 0.5))
            if feasible(s0, s1, scn_more):
                assert feasible(s0, s1, scn_free)

    def test_batch_matches_scalar(self, vehicle):
        rng = np.random.default_rng(3)
        scn = make_empty_scenario()
        add_obstacle(scn, square(8.0, 10.0, 0.8))
        add_obstacle(scn, square(12.0, 12.0, 1.0), cls="vehicle")
        aset = make_action_set(vehicle)
        for _ in range(50):
            s0 = state(rng.uniform(3, 17), rng.uniform(3, 17), rng.uniform(-math.pi, math.pi))
            from parkmcts.vehicle import state_in_collision

            if state_in_collision(s0, scn):
                continue
            mask = feasible_actions(s0, aset, scn)
            for action, ok in zip(aset.actions, mask):
                s1 = transition(s0, action, vehicle)
                assert bool(ok) == feasible(s0, s1, scn)


class TestArcPoses:
    def test_straight_spacing(self, vehicle):
        poses = arc_poses(Pose(0, 0, 0), 1.0, 0.0, vehicle, step=0.1)
        assert len(poses) == 11
        assert poses[0] == pytest.approx([0, 0, 0])
        assert poses[-1] == pytest.approx([1, 0, 0])

    def test_arc_stays_on_circle(self, vehicle):
        steer = 0.5
        radius = vehicle.wheelbase / math.tan(steer)
        poses = arc_poses(Pose(0, 0, 0), 2.0, steer, vehicle, step=0.05)
        cx, cy = 0.0, radius  # circle center for a left turn from the origin
        dists = np.hypot(poses[:, 0] - cx, poses[:, 1] - cy)
        assert np.allclose(dists, radius, atol=1e-9)


class TestDubins:
    def test_straight_line(self, vehicle):
        scn = make_empty_scenario()
        length = dubins_connects(Pose(4, 10, 0), Pose(8, 10, 0), vehicle, scn)
        assert length == pytest.approx(4.0)

    def test_semicircle(self, vehicle):
        # with radius 1 the connection (0,0,0) -> (0,2,pi) is a half turn
        path = dubins.shortest_path((0, 0, 0), (0, 2, math.pi), 1.0)
        assert path.length == pytest.approx(math.pi)

    def test_blocked_by_wall(self, vehicle):
        scn = make_empty_scenario(start=(4.0, 10.0, 0.0), goal=(12.0, 10.0, 0.0))
        add_obstacle(scn, square(8.0, 10.0, 1.5), cls="curb")
        assert dubins_connects(Pose(4, 10, 0), Pose(12, 10, 0), vehicle, scn) is None

    def test_length_lower_bound(self, vehicle):
        rng = np.random.default_rng(4)
        for _ in range(400):
            a = (rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-math.pi, math.pi))
            b = (rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-math.pi, math.pi))
            path = dubins.shortest_path(a, b, rng.uniform(0.5, 4.0))
            assert path is not None
            assert path.length >= math.hypot(b[0] - a[0], b[1] - a[1]) - 1e-9

    def test_samples_reach_goal(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            a = (rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-math.pi, math.pi))
            b = (rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-math.pi, math.pi))
            radius = rng.uniform(0.5, 4.0)
            path = dubins.shortest_path(a, b, radius)
            poses = dubins.sample_path(path, 0.1)
            assert math.hypot(poses[-1, 0] - b[0], poses[-1, 1] - b[1]) < 1e-6
            dh = (poses[-1, 2] - b[2] + math.pi) % (2 * math.pi) - math.pi
            assert abs(dh) < 1e-6
            gaps = np.hypot(np.diff(poses[:, 0]), np.diff(poses[:, 1]))
            assert gaps.max() <= 0.1 + 1e-9
