"""Command-line interface: gen | plan | train | bench.

Exit codes: 0 success, 2 usage error, 3 planner found no path (stats are
still written), 4 missing or incompatible model.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .costs import CostWeights
from .data_pipeline import split_dataset
from .evaluator import NetworkEvaluator, UniformEvaluator
from .hybrid_astar import plan as hastar_plan
from .mcts import SearchConfig, run_search
from .network import CheckpointError, NetworkParams, load_checkpoint
from .pathfile import PathFile, validate_pathfile, write_pathfile
from .policy_iteration import (
    IterationReport,
    read_metrics_csv,
    run_policy_iteration,
    write_metrics_csv,
)
from .runconfig import RunConfig, read_runconfig
from .scenarios import GenSpec, GenerationError, KINDS, generate, load_scenario_dir, read_scenario, write_scenario
from .svg import render_scenario, visited_pose_array
from .textio import DocumentError
from .vehicle import make_action_set

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_PATH = 3
EXIT_BAD_MODEL = 4

BASE_DISCRETIZATION = 0.1  # the reference grid cell the default action step is tuned for


def _cost_objective(path, weights: CostWeights) -> float:
    """Positive path cost: negated component sum plus the tail's distance cost."""
    raw = path.cost.safety + path.cost.comfort + path.cost.efficiency
    return -raw + weights.w_dist * path.dubins_length


def _load_model(path: str, action_set, allow_step_mismatch: bool = False) -> NetworkParams:
    try:
        params = load_checkpoint(path)
    except (OSError, CheckpointError) as exc:
        raise SystemExit(_fail(EXIT_BAD_MODEL, f"cannot load model: {exc}"))
    want = action_set.descriptor()
    have = dict(params.action_descriptor)
    if allow_step_mismatch:
        want.pop("step", None)
        have.pop("step", None)
    if have != want:
        raise SystemExit(_fail(EXIT_BAD_MODEL, f"model action set {have} does not match planner action set {want}"))
    return params


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_gen(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = GenSpec(kind=args.kind, count=args.count, seed=args.seed)
    try:
        scenarios = generate(spec)
    except GenerationError as exc:
        return _fail(1, str(exc))
    for s in scenarios:
        write_scenario(s, out / f"{s.id}.scn")
    print(f"wrote {len(scenarios)} scenarios to {out}")
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    try:
        scenario = read_scenario(args.scenario)
    except (OSError, DocumentError) as exc:
        return _fail(EXIT_USAGE, f"cannot read scenario: {exc}")
    weights = CostWeights()
    action_set = make_action_set(scenario.vehicle)
    visited = None

    if args.planner == "mcts":
        if args.evaluator == "net":
            if not args.model:
                return _fail(EXIT_BAD_MODEL, "planner mcts with --evaluator net requires --model")
            params = _load_model(args.model, action_set)
            evaluator = NetworkEvaluator(params)
        else:
            evaluator = UniformEvaluator(len(action_set))
        config = SearchConfig(
            node_limit=args.node_limit,
            time_limit_ms=args.time_limit_ms,
            path_target=args.path_target,
            action_set=action_set,
        )
        result = run_search(scenario, evaluator, config, weights)
        path = result.best_path
        pf = PathFile(
            scenario_id=scenario.id,
            planner="mcts",
            termination=result.termination,
            nodes=result.nodes_created,
            millis=result.wall_ms,
            path=path,
        )
        from .mcts import NodeStatus

        visited = visited_pose_array(n for n in result.tree.nodes if n.status == NodeStatus.EXPLORED)
    else:
        path, stats = hastar_plan(
            scenario,
            weights=weights,
            action_set=action_set,
            node_limit=args.node_limit,
            time_limit_ms=args.time_limit_ms,
        )
        pf = PathFile(
            scenario_id=scenario.id,
            planner="hastar",
            termination=stats.termination,
            nodes=stats.nodes_expanded,
            millis=stats.wall_ms,
            path=path,
        )

    if args.out:
        write_pathfile(pf, args.out)
    if args.svg:
        Path(args.svg).write_text(render_scenario(scenario, path=path, visited_poses=visited), encoding="utf-8")
    if path is None:
        return _fail(EXIT_NO_PATH, f"no path found ({pf.termination} after {pf.nodes} nodes)")
    problems = validate_pathfile(pf, scenario, weights)
    if problems:
        return _fail(1, f"internal error: emitted path fails validation: {problems}")
    print(
        f"{pf.planner}: path with {len(path.actions)} actions + {path.dubins_length:.2f} m tail, "
        f"cost {path.cost.total:.4f}, {pf.nodes} nodes, {pf.millis:.1f} ms"
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    if not Path(args.scenarios).is_dir():
        return _fail(EXIT_USAGE, f"scenario directory {args.scenarios} does not exist")
    cfg_doc = read_runconfig(args.config) if args.config else RunConfig({})
    seed = args.seed if args.seed is not None else cfg_doc.seed
    train_cfg = cfg_doc.train_config(seed=seed)
    if args.iterations is not None:
        from dataclasses import replace

        train_cfg = replace(train_cfg, iterations=args.iterations)
    weights = cfg_doc.weights()

    scenarios = load_scenario_dir(args.scenarios)
    by_id = {s.id: s for s in scenarios}
    split = split_dataset(sorted(by_id), seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"

    start_iteration = 0
    initial_params = None
    existing: list[IterationReport] = []
    if args.resume and metrics_path.exists():
        existing = read_metrics_csv(metrics_path)
        if existing:
            last = existing[-1]
            start_iteration = last.iteration + 1
            initial_params = load_checkpoint(out / last.checkpoint)
            print(f"resuming after iteration {last.iteration}")

    reports = run_policy_iteration(
        by_id,
        split.train,
        split.validation,
        train_cfg,
        out,
        weights=weights,
        start_iteration=start_iteration,
        initial_params=initial_params,
    )
    write_metrics_csv(metrics_path, reports, append=bool(existing))
    for r in reports:
        print(
            f"iter {r.iteration}: median nodes {r.median_nodes_to_first_path:.0f}, "
            f"success {r.success_rate:.2f}, loss {r.mean_loss:.4f}"
        )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if not Path(args.scenarios).is_dir():
        return _fail(EXIT_USAGE, f"scenario directory {args.scenarios} does not exist")
    try:
        discs = sorted(float(tok) for tok in args.disc.split(","))
    except ValueError:
        return _fail(EXIT_USAGE, f"bad discretization list {args.disc!r}")
    if not discs or any(d <= 0 for d in discs):
        return _fail(EXIT_USAGE, "discretizations must be positive")

    scenarios = load_scenario_dir(args.scenarios)
    by_id = {s.id: s for s in scenarios}
    split = split_dataset(sorted(by_id), args.seed)
    val = [by_id[i] for i in split.validation]
    if not val:
        return _fail(EXIT_USAGE, "validation split is empty")
    weights = CostWeights()
    vehicle = val[0].vehicle
    base_set = make_action_set(vehicle)

    rows: list[list[str]] = []
    for disc in discs:
        scale = disc / BASE_DISCRETIZATION
        action_set = make_action_set(vehicle, steer_count=base_set.steer_count, step=base_set.step * scale)
        params = _load_model(args.model, action_set, allow_step_mismatch=True)
        evaluator = NetworkEvaluator(params)

        for planner in ("hastar", "mcts"):
            ms: list[float] = []
            costs: list[float] = []
            solved = 0
            for scenario in val:
                if planner == "hastar":
                    path, stats = hastar_plan(
                        scenario,
                        weights=weights,
                        action_set=action_set,
                        pos_res=disc,
                        heading_res=0.1 * disc,
                        node_limit=args.node_limit,
                    )
                    ms.append(stats.virtual_ms)
                else:
                    config = SearchConfig(node_limit=args.node_limit, path_target=1, action_set=action_set)
                    result = run_search(scenario, evaluator, config, weights)
                    path = result.best_path
                    ms.append(result.virtual_ms)
                if path is not None:
                    solved += 1
                    costs.append(_cost_objective(path, weights))
            median_ms = float(np.median(ms))
            success = solved / len(val)
            median_cost = float(np.median(costs)) if costs else float("nan")
            rows.append([repr(disc), planner, repr(median_ms), repr(success), repr(median_cost)])

    with open(args.out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["disc", "planner", "median_ms", "success_rate", "median_cost"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} sweep rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parkmcts", description="Parking path-planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate parking scenarios")
    p_gen.add_argument("--kind", choices=KINDS, required=True)
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="output directory for .scn files")
    p_gen.set_defaults(func=cmd_gen)

    p_plan = sub.add_parser("plan", help="plan one scenario with either planner")
    p_plan.add_argument("--scenario", required=True)
    p_plan.add_argument("--planner", choices=("mcts", "hastar"), required=True)
    p_plan.add_argument("--evaluator", choices=("uniform", "net"), default="uniform")
    p_plan.add_argument("--model", help="checkpoint file (required for --evaluator net)")
    p_plan.add_argument("--node-limit", type=int, default=20_000)
    p_plan.add_argument("--time-limit-ms", type=float, default=None)
    p_plan.add_argument("--path-target", type=int, default=1)
    p_plan.add_argument("--out", help="path file to write")
    p_plan.add_argument("--svg", help="scenario/result picture to write")
    p_plan.set_defaults(func=cmd_plan)

    p_train = sub.add_parser("train", help="run the search/train loop over a scenario directory")
    p_train.add_argument("--scenarios", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--config", help="run-config file")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--iterations", type=int, default=None)
    p_train.add_argument("--resume", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_bench = sub.add_parser("bench", help="planner comparison sweep over the validation split")
    p_bench.add_argument("--scenarios", required=True)
    p_bench.add_argument("--model", required=True)
    p_bench.add_argument("--disc", default="0.1", help="comma-separated grid cell sizes")
    p_bench.add_argument("--out", required=True, help="sweep CSV to write")
    p_bench.add_argument("--node-limit", type=int, default=4_000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except DocumentError as exc:
        return _fail(EXIT_USAGE, str(exc))


if __name__ == "__main__":
    sys.exit(main())
