"""Evaluators: the state -> (action priors, value) functions used by search.

`UniformEvaluator` is the training-free baseline (flat priors, value 0.5).
`NetworkEvaluator` encodes the state tensor and runs the network; it caches
one scenario's static channels at a time since searches are per-scenario.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .encoding import ScenarioEncoder
from .geometry import Pose
from .network import NetworkParams, forward
from .vehicle import MotionState

if TYPE_CHECKING:
    from .scenarios import Scenario


class UniformEvaluator:
    """Flat priors and a neutral value, independent of the input."""

    name = "uniform"

    def __init__(self, action_count: int):
        if action_count < 1:
            raise ValueError("action_count must be >= 1")
        self.action_count = action_count
        self._p = np.full(action_count, 1.0 / action_count)

    def evaluate(self, scenario: "Scenario", state: MotionState, parent_pose: Pose) -> tuple[np.ndarray, float]:
        return self._p, 0.5


class NetworkEvaluator:
    name = "network"

    def __init__(self, params: NetworkParams):
        self.params = params
        self.action_count = params.action_count
        self._encoder: ScenarioEncoder | None = None

    def _encoder_for(self, scenario: "Scenario") -> ScenarioEncoder:
        if self._encoder is None or self._encoder.scenario is not scenario:
            self._encoder = ScenarioEncoder(scenario)
        return self._encoder

    def evaluate(self, scenario: "Scenario", state: MotionState, parent_pose: Pose) -> tuple[np.ndarray, float]:
        tensor = self._encoder_for(scenario).encode(state, parent_pose)
        return forward(self.params, tensor)


def uniform_evaluator(action_count: int) -> UniformEvaluator:
    return UniformEvaluator(action_count)
