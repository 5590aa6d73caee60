"""Harvesting training samples from terminated search trees.

Nodes on any chain from the root to a destination-connected node are "good"
(r = 1); every other live explored node is "bad" (r = 0).  Farthest point
sampling balances the two sets before they are turned into (tensor, policy
label, r) samples.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .encoding import ScenarioEncoder
from .mcts import NodeStatus, SearchTree, TreeNode
from .rng import derive_rng

if TYPE_CHECKING:
    from .scenarios import Scenario

HEADING_WEIGHT = 1.0  # metres of distance per radian of heading difference


@dataclass
class TrainingSample:
    tensor: np.ndarray  # (8, 64, 64) float32
    pi: np.ndarray  # (|A|,) float32, sums to 1
    r: int  # 1 good, 0 bad


class ReplayBuffer:
    """Bounded FIFO store with uniform random batch draws."""

    def __init__(self, capacity: int = 50_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._store: deque[TrainingSample] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._store)

    def extend(self, samples: Sequence[TrainingSample]) -> None:
        self._store.extend(samples)

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> list[TrainingSample]:
        if not self._store:
            raise ValueError("buffer is empty")
        n = len(self._store)
        if batch_size <= n:
            idx = rng.choice(n, size=batch_size, replace=False)
        else:
            idx = rng.integers(0, n, size=batch_size)
        return [self._store[int(i)] for i in idx]


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    test: tuple[str, ...]
    validation: tuple[str, ...]


def label_nodes(tree: SearchTree) -> tuple[list[TreeNode], list[TreeNode]]:
    """Split live explored nodes into destination-chain members and the rest."""
    good_ids: set[int] = set()
    for leaf in tree.dest_nodes:
        node: TreeNode | None = leaf
        while node is not None and node.node_id not in good_ids:
            good_ids.add(node.node_id)
            node = node.parent
    good: list[TreeNode] = []
    bad: list[TreeNode] = []
    for node in [tree.root] + tree.nodes:
        if node.status != NodeStatus.EXPLORED:
            continue
        (good if node.node_id in good_ids else bad).append(node)
    return good, bad


def _pose_metric_coords(nodes: Sequence[TreeNode]) -> np.ndarray:
    return np.array(
        [[n.state.pose.x, n.state.pose.y, n.state.pose.heading] for n in nodes], dtype=np.float64
    )


def fps_sample(nodes: Sequence[TreeNode], k: int) -> list[TreeNode]:
    """Greedy farthest-point subset in (position, weighted heading) space.

    Seeded with the lowest-id node; distance ties keep the lowest id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not nodes:
        raise ValueError("cannot sample from an empty node list")
    ordered = sorted(nodes, key=lambda n: n.node_id)
    coords = _pose_metric_coords(ordered)
    n = len(ordered)
    k = min(k, n)

    def dist_to(i: int) -> np.ndarray:
        dh = np.abs((coords[:, 2] - coords[i, 2] + math.pi) % (2.0 * math.pi) - math.pi)
        return np.hypot(coords[:, 0] - coords[i, 0], coords[:, 1] - coords[i, 1]) + HEADING_WEIGHT * dh

    selected = [0]
    min_dist = dist_to(0)
    while len(selected) < k:
        nxt = int(np.argmax(min_dist))  # argmax keeps the first (lowest-id) maximum
        selected.append(nxt)
        np.minimum(min_dist, dist_to(nxt), out=min_dist)
    return [ordered[i] for i in selected]


def policy_label(node: TreeNode, tau: float) -> np.ndarray:
    """Visit-count distribution sharpened by 1/tau; trimmed actions get zero."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if node.status != NodeStatus.EXPLORED or node.edge_visits is None:
        raise ValueError("policy labels need an explored node")
    counts = node.edge_visits.astype(np.float64)
    alive = node.living_mask()
    counts[~alive] = 0.0
    if counts.sum() <= 0:
        raise ValueError("policy labels need at least one visited action")
    pi = np.zeros_like(counts)
    pos = counts > 0
    logw = np.log(counts[pos]) / tau
    w = np.exp(logw - logw.max())
    pi[pos] = w / w.sum()
    return pi


def harvest(
    tree: SearchTree,
    scenario: "Scenario",
    per_tree: int = 16,
    tau: float = 1.0,
    encoder: ScenarioEncoder | None = None,
) -> list[TrainingSample]:
    """Balanced good/bad samples from one terminated tree (possibly empty)."""
    good, bad = label_nodes(tree)
    good = [n for n in good if int(n.edge_visits.sum()) > 0]
    bad = [n for n in bad if int(n.edge_visits.sum()) > 0]
    if not good or not bad:
        return []
    k = min(per_tree, len(good), len(bad))
    if encoder is None:
        encoder = ScenarioEncoder(scenario)
    samples: list[TrainingSample] = []
    for r, nodes in ((1, fps_sample(good, k)), (0, fps_sample(bad, k))):
        for node in nodes:
            parent_pose = node.parent.state.pose if node.parent is not None else node.state.pose
            samples.append(
                TrainingSample(
                    tensor=encoder.encode(node.state, parent_pose),
                    pi=policy_label(node, tau).astype(np.float32),
                    r=r,
                )
            )
    return samples


def split_dataset(scenario_ids: Sequence[str], seed: int) -> DatasetSplit:
    """Deterministic 70/15/15 split (sizes rounded to nearest)."""
    ids = list(scenario_ids)
    if len(ids) < 3:
        raise ValueError("need at least 3 scenarios to split")
    rng = derive_rng(seed, "dataset-split")
    perm = rng.permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    n = len(ids)
    n_test = round(0.15 * n)
    n_val = round(0.15 * n)
    n_train = n - n_test - n_val
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        test=tuple(shuffled[n_train : n_train + n_test]),
        validation=tuple(shuffled[n_train + n_test :]),
    )
