import json
import math
from pathlib import Path

import numpy as np
import pytest

from parkmcts.encoding import CHANNELS, GRID_SIZE, ScenarioEncoder, encode_state
from parkmcts.evaluator import NetworkEvaluator, UniformEvaluator, uniform_evaluator
from parkmcts.network import (
    CheckpointError,
    Trainer,
    forward,
    forward_batch,
    init_params,
    layer_specs,
    load_checkpoint,
    loss_and_grads,
    loss_batch,
    sample_losses,
    save_checkpoint,
    zero_params,
)
from parkmcts.geometry import Pose
from parkmcts.vehicle import GEAR_FORWARD, GEAR_REVERSE, MotionState

from .conftest import add_obstacle, make_empty_scenario, square

GOLDEN_PATH = Path(__file__).parent / "data" / "golden_forward.json"


def seeded_input(seed: int = 0, batch: int = 1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = np.zeros((batch, CHANNELS, GRID_SIZE, GRID_SIZE), dtype=np.float32)
    x[:, 0:6] = (rng.random((batch, 6, GRID_SIZE, GRID_SIZE)) < 0.1).astype(np.float32)
    x[:, 6] = rng.choice([-1.0, 1.0], size=(batch, 1, 1))
    x[:, 7] = rng.uniform(-1, 1, size=(batch, 1, 1))
    return x


class TestEncoding:
    def test_empty_scenario_root(self):
        scn = make_empty_scenario()
        enc = ScenarioEncoder(scn)
        t = enc.encode(scn.start, scn.start.pose)
        assert t.shape == (CHANNELS, GRID_SIZE, GRID_SIZE)
        assert t[0:3].sum() == 0  # no obstacles
        assert np.array_equal(t[3], t[4])  # parent layer equals current at the root
        assert t[3].sum() > 0

    def test_gear_channel(self):
        scn = make_empty_scenario()
        enc = ScenarioEncoder(scn)
        rev = MotionState(pose=scn.start.pose, gear=GEAR_REVERSE, steer=0.0)
        t = enc.encode(rev, scn.start.pose)
        assert np.all(t[6] == -1.0)
        fwd = MotionState(pose=scn.start.pose, gear=GEAR_FORWARD, steer=0.3)
        t2 = enc.encode(fwd, scn.start.pose)
        assert np.all(t2[6] == 1.0)
        assert np.allclose(t2[7], 0.3 / scn.vehicle.max_steer)

    def test_obstacle_cell_count(self):
        # a 2 m square on a 32 m world rasterized at 0.5 m/cell covers 4x4 cells
        scn = make_empty_scenario(bounds=(0.0, 0.0, 32.0, 32.0))
        add_obstacle(scn, square(16.0, 16.0, 1.0))
        enc = ScenarioEncoder(scn)
        t = enc.encode(scn.start, scn.start.pose)
        assert t[2].sum() == 16  # pillar channel

    def test_translation_locality(self):
        # moving everything by one whole cell shifts the occupancy channels
        scn1 = make_empty_scenario(start=(6.0, 10.0, 0.0), goal=(12.0, 10.0, 0.0))
        add_obstacle(scn1, square(10.0, 6.0, 0.8))
        cell = max(scn1.bounds[2] - scn1.bounds[0], scn1.bounds[3] - scn1.bounds[1]) / GRID_SIZE
        scn2 = make_empty_scenario(start=(6.0 + cell, 10.0, 0.0), goal=(12.0 + cell, 10.0, 0.0))
        add_obstacle(scn2, square(10.0 + cell, 6.0, 0.8))
        t1 = encode_state_like(scn1)
        t2 = encode_state_like(scn2)
        shifted = np.roll(t1[:6], 1, axis=2)
        assert np.array_equal(shifted[:, :, 1:], t2[:6][:, :, 1:])

    def test_deterministic(self):
        scn = make_empty_scenario()
        add_obstacle(scn, square(9.0, 8.0, 0.7), cls="vehicle")
        a = encode_state_like(scn)
        b = encode_state_like(scn)
        assert np.array_equal(a, b)


def encode_state_like(scn):
    enc = ScenarioEncoder(scn)
    return enc.encode(scn.start, scn.start.pose)


class TestForward:
    def test_output_invariants(self):
        params = init_params(14, seed=3)
        x = seeded_input(1, batch=5)
        p, v = forward_batch(params, x)
        assert p.shape == (5, 14)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(p > 0)
        assert np.all((0 <= v) & (v <= 1))

    def test_zero_params_uniform(self):
        params = zero_params(6)
        p, v = forward(params, seeded_input(2)[0])
        assert np.allclose(p, 1.0 / 6, atol=1e-7)
        assert v == pytest.approx(0.5, abs=1e-7)

    def test_deterministic(self):
        params = init_params(14, seed=4)
        x = seeded_input(5)[0]
        p1, v1 = forward(params, x)
        p2, v2 = forward(params, x)
        assert np.array_equal(p1, p2) and v1 == v2

    def test_golden_output(self):
        golden = json.loads(GOLDEN_PATH.read_text())
        params = init_params(golden["action_count"], seed=golden["param_seed"])
        x = seeded_input(golden["input_seed"])[0]
        p, v = forward(params, x)
        assert np.allclose(p, golden["p"], atol=1e-6)
        assert v == pytest.approx(golden["v"], abs=1e-6)


class TestLoss:
    def test_uniform_cross_entropy(self):
        # p == pi == uniform over 4 actions and v == r gives exactly ln 4
        params = zero_params(4)
        x = seeded_input(0)
        pi = np.full((1, 4), 0.25, dtype=np.float32)
        r = np.array([0.5])  # sigmoid(0) == 0.5 == r
        assert loss_batch(params, x, pi, r) == pytest.approx(math.log(4.0), abs=1e-6)

    def test_perfect_prediction_is_zero(self):
        # one-hot label, matching unit probability, exact value estimate
        logp = np.log(np.array([[1.0, 1e-300, 1e-300]]))
        pi = np.array([[1.0, 0.0, 0.0]])
        loss = sample_losses(logp, pi, np.array([0.7]), np.array([0.7]))
        assert float(loss[0]) == pytest.approx(0.0, abs=1e-9)

    def test_value_only_case(self):
        # perfect policy but v = 0 against r = 1 contributes exactly 1
        logp = np.log(np.array([[1.0, 1e-300]]))
        pi = np.array([[1.0, 0.0]])
        loss = sample_losses(logp, pi, np.array([0.0]), np.array([1.0]))
        assert float(loss[0]) == pytest.approx(1.0, abs=1e-9)


class TestGradients:
    def test_analytic_matches_finite_difference(self):
        # smooth random input: a binary occupancy tensor parks many conv
        # pre-activations exactly on the rectifier kink, where central
        # differences are meaningless
        params = init_params(6, seed=8).astype(np.float64)
        rng = np.random.default_rng(10)
        x = rng.uniform(-1.0, 1.0, size=(3, CHANNELS, GRID_SIZE, GRID_SIZE))
        pi = rng.dirichlet(np.ones(6), size=3).astype(np.float64)
        r = rng.integers(0, 2, size=3).astype(np.float64)

        _, grads = loss_and_grads(params, x, pi, r)
        eps = 1e-3
        checked = 0
        worst = 0.0
        names = [name for name, _ in layer_specs(6)]
        while checked < 100:
            name = names[int(rng.integers(0, len(names)))]
            arr = params.arrays[name]
            flat_idx = int(rng.integers(0, arr.size))
            idx = np.unravel_index(flat_idx, arr.shape)
            orig = arr[idx]
            arr[idx] = orig + eps
            up = loss_batch(params, x, pi, r)
            arr[idx] = orig - eps
            down = loss_batch(params, x, pi, r)
            arr[idx] = orig
            fd = (up - down) / (2 * eps)
            an = float(grads[name][idx])
            denom = max(1e-8, abs(fd) + abs(an))
            rel = abs(fd - an) / denom
            worst = max(worst, rel)
            checked += 1
        assert worst < 1e-3, f"worst relative gradient error {worst}"

    def test_training_reduces_loss_on_fixed_batch(self):
        params = init_params(6, seed=11)
        trainer = Trainer(params)
        x = seeded_input(12, batch=16)
        rng = np.random.default_rng(13)
        pi = rng.dirichlet(np.ones(6), size=16).astype(np.float32)
        r = rng.integers(0, 2, size=16).astype(np.float32)
        losses = [trainer.train_step(x, pi, r, 1e-3) for _ in range(50)]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_zero_learning_rate_is_identity(self):
        params = init_params(6, seed=14)
        before = {k: v.copy() for k, v in params.arrays.items()}
        trainer = Trainer(params)
        x = seeded_input(15, batch=4)
        pi = np.full((4, 6), 1 / 6, dtype=np.float32)
        r = np.zeros(4, dtype=np.float32)
        trainer.train_step(x, pi, r, 0.0)
        for k in before:
            assert np.array_equal(before[k], params.arrays[k])


class TestUniformEvaluator:
    def test_flat_priors(self):
        ev = uniform_evaluator(6)
        scn = make_empty_scenario()
        p, v = ev.evaluate(scn, scn.start, scn.start.pose)
        assert np.allclose(p, 1 / 6)
        assert v == 0.5

    def test_input_independent(self):
        ev = uniform_evaluator(4)
        scn1 = make_empty_scenario()
        scn2 = make_empty_scenario(start=(3.0, 3.0, 1.0))
        add_obstacle(scn2, square(10, 10, 1.0))
        p1, v1 = ev.evaluate(scn1, scn1.start, scn1.start.pose)
        p2, v2 = ev.evaluate(scn2, scn2.start, scn2.start.pose)
        assert np.array_equal(p1, p2) and v1 == v2

    def test_rejects_bad_count(self):
        with pytest.raises(ValueError):
            uniform_evaluator(0)


class TestCheckpoints:
    def test_round_trip_bit_exact(self, tmp_path):
        params = init_params(14, seed=16, action_descriptor={"action_count": 14, "steer_count": 7, "step": 0.8, "max_steer": 0.6})
        path = tmp_path / "model.pkmc"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.action_count == params.action_count
        assert loaded.action_descriptor == params.action_descriptor
        for name in params.arrays:
            assert np.array_equal(params.arrays[name], loaded.arrays[name])
        # a second save of the loaded params is byte-identical
        path2 = tmp_path / "model2.pkmc"
        save_checkpoint(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_truncated_file_rejected(self, tmp_path):
        params = init_params(6, seed=17)
        path = tmp_path / "model.pkmc"
        save_checkpoint(params, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 17])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.pkmc"
        path.write_bytes(b"NOTANETWORK")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_action_set_mismatch_refused(self, tmp_path):
        desc = {"action_count": 14, "steer_count": 7, "step": 0.8, "max_steer": 0.6}
        params = init_params(14, seed=18, action_descriptor=desc)
        path = tmp_path / "model.pkmc"
        save_checkpoint(params, path)
        other = {"action_count": 10, "steer_count": 5, "step": 0.8, "max_steer": 0.6}
        with pytest.raises(CheckpointError):
            load_checkpoint(path, expect_action_descriptor=other)


class TestNetworkEvaluator:
    def test_search_integration(self):
        from parkmcts.mcts import SearchConfig, run_search
        from parkmcts.vehicle import make_action_set

        scn = make_empty_scenario()
        aset = make_action_set(scn.vehicle)
        ev = NetworkEvaluator(init_params(len(aset), seed=19))
        res = run_search(scn, ev, SearchConfig(node_limit=400, path_target=1, action_set=aset))
        assert res.termination in ("path_target", "node_limit")
