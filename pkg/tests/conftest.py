import numpy as np
import pytest

from parkmcts.geometry import ConvexPolygon, Pose, VehicleFootprint
from parkmcts.scenarios import DEFAULT_VEHICLE, Obstacle, Scenario
from parkmcts.vehicle import GEAR_FORWARD, MotionState, VehicleParams


@pytest.fixture
def vehicle() -> VehicleParams:
    return DEFAULT_VEHICLE


def make_empty_scenario(start=(5.0, 10.0, 0.0), goal=(11.0, 10.0, 0.0), bounds=(0.0, 0.0, 20.0, 20.0)):
    return Scenario(
        id="test-empty",
        kind="empty_lot",
        bounds=bounds,
        obstacles=[],
        start=MotionState(pose=Pose(*start), gear=GEAR_FORWARD, steer=0.0),
        goal=Pose(*goal),
        vehicle=DEFAULT_VEHICLE,
    )


def square(cx: float, cy: float, half: float) -> ConvexPolygon:
    return ConvexPolygon(
        [
            (cx - half, cy - half),
            (cx + half, cy - half),
            (cx + half, cy + half),
            (cx - half, cy + half),
        ]
    )


def add_obstacle(scenario: Scenario, poly: ConvexPolygon, cls: str = "pillar") -> None:
    scenario.obstacles.append(Obstacle(cls, poly))


@pytest.fixture
def empty_scenario() -> Scenario:
    return make_empty_scenario()
