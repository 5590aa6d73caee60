"""Outer training loop: search with the current network, harvest, train, evaluate.

Iteration 0 searches with the uniform evaluator; every iteration trains the
network on the replay buffer and is then scored on the validation split with
a node-limited search so the effort metric is machine-independent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

import numpy as np

from .costs import CostWeights
from .data_pipeline import ReplayBuffer, harvest
from .encoding import ScenarioEncoder
from .evaluator import NetworkEvaluator, UniformEvaluator
from .mcts import SearchConfig, run_search
from .network import NetworkParams, Trainer, init_params, save_checkpoint
from .rng import derive_rng
from .vehicle import make_action_set

if TYPE_CHECKING:
    from .scenarios import Scenario


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 8
    scenarios_per_iter: int = 30
    epochs: int = 2
    batch_size: int = 64
    learning_rate: float = 1e-3
    tau: float = 1.0
    per_tree: int = 16
    seed: int = 0
    buffer_capacity: int = 50_000
    search_node_limit: int = 1_500
    search_path_target: int = 3
    eval_node_limit: int = 4_000

    def __post_init__(self) -> None:
        for name in (
            "iterations",
            "scenarios_per_iter",
            "epochs",
            "batch_size",
            "per_tree",
            "buffer_capacity",
            "search_node_limit",
            "search_path_target",
            "eval_node_limit",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.tau <= 0:
            raise ValueError("learning_rate and tau must be positive")


@dataclass
class EvalSummary:
    success_rate: float
    median_nodes: float  # unsolved runs are counted at their final node count
    median_ms: float  # deterministic per-node time proxy, solved runs only
    p10_ms: float
    p90_ms: float
    solved: int
    total: int


@dataclass
class IterationReport:
    iteration: int
    median_nodes_to_first_path: float
    median_plan_ms: float
    p10_ms: float
    p90_ms: float
    success_rate: float
    mean_loss: float
    checkpoint: str


def percentile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile (matches numpy's default)."""
    return float(np.percentile(np.asarray(values, dtype=np.float64), q))


def evaluate(
    scenarios: Sequence["Scenario"],
    evaluator,
    config: SearchConfig,
    weights: CostWeights | None = None,
) -> EvalSummary:
    """Search every scenario once and summarize effort and success."""
    if not scenarios:
        raise ValueError("evaluation needs at least one scenario")
    nodes_all: list[float] = []
    ms_solved: list[float] = []
    solved = 0
    for scenario in scenarios:
        result = run_search(scenario, evaluator, config, weights)
        if result.success:
            solved += 1
            nodes_all.append(float(result.nodes_to_first_path))
            ms_solved.append(result.virtual_ms)
        else:
            nodes_all.append(float(result.nodes_created))
    if ms_solved:
        med, p10, p90 = (percentile(ms_solved, q) for q in (50, 10, 90))
    else:
        med = p10 = p90 = math.nan
    return EvalSummary(
        success_rate=solved / len(scenarios),
        median_nodes=percentile(nodes_all, 50),
        median_ms=med,
        p10_ms=p10,
        p90_ms=p90,
        solved=solved,
        total=len(scenarios),
    )


def run_policy_iteration(
    scenarios_by_id: Mapping[str, "Scenario"],
    train_ids: Sequence[str],
    validation_ids: Sequence[str],
    cfg: TrainConfig,
    out_dir: str | Path,
    weights: CostWeights | None = None,
    start_iteration: int = 0,
    initial_params: Optional[NetworkParams] = None,
) -> list[IterationReport]:
    """Alternate search and training for cfg.iterations rounds.

    Deterministic for a fixed seed: scenario sampling, batch draws and the
    network initialization all derive from cfg.seed.
    """
    if not train_ids or not validation_ids:
        raise ValueError("training and validation splits must be nonempty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    weights = weights if weights is not None else CostWeights()

    sample_scenario = scenarios_by_id[train_ids[0]]
    action_set = make_action_set(sample_scenario.vehicle)
    n_actions = len(action_set)
    search_config = SearchConfig(
        node_limit=cfg.search_node_limit,
        path_target=cfg.search_path_target,
        action_set=action_set,
    )
    eval_config = SearchConfig(
        node_limit=cfg.eval_node_limit,
        path_target=1,
        action_set=action_set,
    )

    params = initial_params
    trainer: Trainer | None = Trainer(params) if params is not None else None
    buffer = ReplayBuffer(cfg.buffer_capacity)
    encoders: dict[str, ScenarioEncoder] = {}
    reports: list[IterationReport] = []

    for iteration in range(start_iteration, start_iteration + cfg.iterations):
        # 1. search the sampled training scenarios with a frozen evaluator
        if params is None:
            search_eval = UniformEvaluator(n_actions)
        else:
            search_eval = NetworkEvaluator(params.copy())
        rng = derive_rng(cfg.seed, "iteration", iteration)
        replace_draw = len(train_ids) < cfg.scenarios_per_iter
        picked = rng.choice(len(train_ids), size=cfg.scenarios_per_iter, replace=replace_draw)

        harvested = 0
        for idx in picked:
            scenario = scenarios_by_id[train_ids[int(idx)]]
            result = run_search(scenario, search_eval, search_config, weights)
            encoder = encoders.get(scenario.id)
            if encoder is None:
                encoder = encoders[scenario.id] = ScenarioEncoder(scenario)
            samples = harvest(result.tree, scenario, per_tree=cfg.per_tree, tau=cfg.tau, encoder=encoder)
            buffer.extend(samples)
            harvested += len(samples)
        if harvested == 0:
            raise RuntimeError(
                f"iteration {iteration} harvested zero samples; "
                "searches are not finding (or not missing) any paths"
            )

        # 2. train on the replay buffer
        if params is None:
            params = init_params(n_actions, seed=cfg.seed, action_descriptor=action_set.descriptor())
            trainer = Trainer(params)
        steps = cfg.epochs * max(1, len(buffer) // cfg.batch_size)
        batch_rng = derive_rng(cfg.seed, "batches", iteration)
        losses = []
        for _ in range(steps):
            batch = buffer.sample_batch(cfg.batch_size, batch_rng)
            tensors = np.stack([s.tensor for s in batch])
            pis = np.stack([s.pi for s in batch])
            rs = np.array([float(s.r) for s in batch], dtype=np.float32)
            losses.append(trainer.train_step(tensors, pis, rs, cfg.learning_rate))
        mean_loss = float(np.mean(losses))

        # 3. evaluate the updated network on the validation split
        val_eval = NetworkEvaluator(params.copy())
        summary = evaluate([scenarios_by_id[i] for i in validation_ids], val_eval, eval_config, weights)

        # 4. checkpoint
        ckpt_path = out_dir / f"checkpoint-{iteration:03d}.pkmc"
        save_checkpoint(params, ckpt_path)
        reports.append(
            IterationReport(
                iteration=iteration,
                median_nodes_to_first_path=summary.median_nodes,
                median_plan_ms=summary.median_ms,
                p10_ms=summary.p10_ms,
                p90_ms=summary.p90_ms,
                success_rate=summary.success_rate,
                mean_loss=mean_loss,
                checkpoint=ckpt_path.name,
            )
        )
    return reports


METRICS_HEADER = ["iter", "median_nodes", "median_ms", "p10_ms", "p90_ms", "success_rate", "mean_loss", "checkpoint"]


def write_metrics_csv(path: str | Path, reports: Sequence[IterationReport], append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as f:
        writer = csv.writer(f)
        if not append:
            writer.writerow(METRICS_HEADER)
        for r in reports:
            writer.writerow(
                [
                    r.iteration,
                    repr(r.median_nodes_to_first_path),
                    repr(r.median_plan_ms),
                    repr(r.p10_ms),
                    repr(r.p90_ms),
                    repr(r.success_rate),
                    repr(r.mean_loss),
                    r.checkpoint,
                ]
            )


def read_metrics_csv(path: str | Path) -> list[IterationReport]:
    reports = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected metrics header {header}")
        for row in reader:
            reports.append(
                IterationReport(
                    iteration=int(row[0]),
                    median_nodes_to_first_path=float(row[1]),
                    median_plan_ms=float(row[2]),
                    p10_ms=float(row[3]),
                    p90_ms=float(row[4]),
                    success_rate=float(row[5]),
                    mean_loss=float(row[6]),
                    checkpoint=row[7],
                )
            )
    return reports
