"""Run configuration file: one flat document of every tunable, strict schema."""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path

from .costs import CostWeights
from .policy_iteration import TrainConfig
from .textio import DocumentError, FieldReader, fmt_float, read_document, write_document

# key -> (type tag, default) ; the single source of truth for the schema
_SCHEMA: dict[str, tuple[str, object]] = {
    "seed": ("int", 0),
    "action.steer_count": ("int", 7),
    "action.step": ("float", 0.8),
    "search.c_puct": ("float", 1.5),
    "search.node_limit": ("int", 20_000),
    "search.path_target": ("int", 1),
    "search.max_depth": ("int", 30),
    "weights.safety_threshold": ("float", 0.3),
    "weights.w_safety": ("float", 0.5),
    "weights.w_gear": ("float", 0.05),
    "weights.w_steer": ("float", 0.02),
    "weights.w_dist": ("float", 0.01),
    "weights.alpha0": ("float", 0.7),
    "weights.alpha1": ("float", 0.3),
    "train.iterations": ("int", 8),
    "train.scenarios_per_iter": ("int", 30),
    "train.epochs": ("int", 2),
    "train.batch_size": ("int", 64),
    "train.learning_rate": ("float", 1e-3),
    "train.tau": ("float", 1.0),
    "train.per_tree": ("int", 16),
    "train.buffer_capacity": ("int", 50_000),
    "train.search_node_limit": ("int", 1_500),
    "train.search_path_target": ("int", 3),
    "train.eval_node_limit": ("int", 4_000),
}


@dataclass
class RunConfig:
    values: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        merged = {k: default for k, (_, default) in _SCHEMA.items()}
        for k, v in self.values.items():
            if k not in _SCHEMA:
                raise DocumentError(f"unknown config key {k!r}")
            merged[k] = v
        self.values = merged

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def weights(self) -> CostWeights:
        g = self.values
        return CostWeights(
            safety_threshold=g["weights.safety_threshold"],
            w_safety=g["weights.w_safety"],
            w_gear=g["weights.w_gear"],
            w_steer=g["weights.w_steer"],
            w_dist=g["weights.w_dist"],
            alpha0=g["weights.alpha0"],
            alpha1=g["weights.alpha1"],
        )

    def train_config(self, seed: int | None = None) -> TrainConfig:
        g = self.values
        return TrainConfig(
            iterations=g["train.iterations"],
            scenarios_per_iter=g["train.scenarios_per_iter"],
            epochs=g["train.epochs"],
            batch_size=g["train.batch_size"],
            learning_rate=g["train.learning_rate"],
            tau=g["train.tau"],
            per_tree=g["train.per_tree"],
            seed=self.seed if seed is None else seed,
            buffer_capacity=g["train.buffer_capacity"],
            search_node_limit=g["train.search_node_limit"],
            search_path_target=g["train.search_path_target"],
            eval_node_limit=g["train.eval_node_limit"],
        )


def read_runconfig(path: str | Path) -> RunConfig:
    raw = read_document(path)
    r = FieldReader(raw, str(path))
    values: dict[str, object] = {}
    for key in raw:
        if key not in _SCHEMA:
            raise DocumentError(f"{path}: unknown config key {key!r}")
        kind, _ = _SCHEMA[key]
        values[key] = r.int_(key) if kind == "int" else r.float_(key)
    r.finish()
    return RunConfig(values)


def write_runconfig(cfg: RunConfig, path: str | Path) -> None:
    pairs = []
    for key in _SCHEMA:
        kind, _ = _SCHEMA[key]
        value = cfg.values[key]
        pairs.append((key, str(int(value)) if kind == "int" else fmt_float(float(value))))
    write_document(path, pairs)
