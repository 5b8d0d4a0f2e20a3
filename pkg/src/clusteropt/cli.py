"""Command-line entry point.

Subcommands: split, run, inductive, gradcheck, table. Exit codes: 0 ok,
1 config error, 2 numerical failure, 3 check failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import RESULTS_ENV, ConfigError, RunConfig, inductive_defaults, load_config
from .experiments import NumericalError, results_table, run_inductive, run_method
from .graphs import generate_sbm, load_edge_list, save_split, split_edges

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_CHECK = 3


def _add_config_args(p):
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config field (repeatable)")


def _build_config(args) -> RunConfig:
    return load_config(args.config, args.overrides)


def cmd_split(args) -> int:
    g = load_edge_list(args.edges)
    split = split_edges(g, args.fraction, args.seed)
    save_split(split, args.out)
    print(f"split {g.m} edges: {len(split.train_edges)} train / "
          f"{len(split.held_edges)} held -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _build_config(args)
    result = run_method(cfg)
    out_dir = cfg.resolved_results_dir
    stem = args.name or f"{cfg.task}_{cfg.method}_{cfg.mode}_seed{cfg.seed}"
    result.save(out_dir, stem)
    print(f"{cfg.method} [{cfg.task}/{cfg.mode}] objective(full)="
          f"{result.objective_full_graph:.4f} objective(train)="
          f"{result.objective_train_graph:.4f} -> {out_dir / (stem + '.json')}")
    return EXIT_OK


def cmd_inductive(args) -> int:
    cfg = load_config(args.config, args.overrides) if args.config or args.overrides \
        else inductive_defaults()
    if args.sbm:
        sizes, p_in, p_out = _parse_sbm(args.sbm)
        train_graphs = [generate_sbm(sizes, p_in, p_out, seed=cfg.seed + i)
                        for i in range(args.train_count)]
        test_graphs = [generate_sbm(sizes, p_in, p_out, seed=cfg.seed + 1000 + i)
                       for i in range(args.test_count)]
    elif args.train_edges and args.test_edges:
        train_graphs = [load_edge_list(p) for p in args.train_edges]
        test_graphs = [load_edge_list(p) for p in args.test_edges]
    else:
        raise ConfigError("give either --sbm or --train-edges/--test-edges")

    if args.save_params and args.variant != "finetune-only":
        from .experiments import train_inductive
        from .gcn import save_params
        params, _ = train_inductive(train_graphs, cfg,
                                    limit_to_first=args.variant == "1train")
        save_params(params, args.save_params)
        print(f"saved trained parameters to {args.save_params}")

    results = run_inductive(train_graphs, test_graphs, cfg, variant=args.variant,
                            finetune_iters=args.finetune_iters)
    out_dir = cfg.resolved_results_dir
    for i, res in enumerate(results):
        res.save(out_dir, f"inductive_{args.variant}_{cfg.task}_g{i}")
    mean = float(np.mean([r.objective_full_graph for r in results]))
    print(f"inductive[{args.variant}] {cfg.task} mean objective over "
          f"{len(results)} test graphs: {mean:.4f}")
    return EXIT_OK


def _parse_sbm(spec: str):
    # e.g. "4x50:0.15:0.01" -> blocks, p_in, p_out
    try:
        blocks, p_in, p_out = spec.split(":")
        count, size = blocks.split("x")
        return [int(size)] * int(count), float(p_in), float(p_out)
    except ValueError as exc:
        raise ConfigError(f"bad --sbm spec {spec!r}; want CxS:p_in:p_out") from exc


def cmd_gradcheck(args) -> int:
    from .gradcheck import full_report

    rows = full_report()
    width = max(len(f"{section}.{name}") for section, name, _, _ in rows)
    failures = 0
    for section, name, err, ok in rows:
        status = "pass" if ok else "FAIL"
        print(f"{section + '.' + name:<{width}}  max_rel_err={err:.3e}  {status}")
        failures += not ok
    print(f"{len(rows) - failures}/{len(rows)} checks passed")
    return EXIT_OK if failures == 0 else EXIT_CHECK


def cmd_table(args) -> int:
    print(results_table(args.results_dir, fmt=args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clusteropt",
        description="Decision-focused graph optimization via a differentiable "
                    "clustering layer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="hold out a fraction of edges, save the manifest")
    p.add_argument("edges", help="edge-list file")
    p.add_argument("--fraction", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="split.json")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("run", help="run one method on one graph")
    _add_config_args(p)
    p.add_argument("--name", help="output file stem")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("inductive", help="train across graphs, apply to unseen ones")
    _add_config_args(p)
    p.add_argument("--variant", default="no-finetune",
                   choices=["no-finetune", "finetune", "finetune-only", "1train"])
    p.add_argument("--sbm", help="synthetic collection, e.g. 4x50:0.15:0.01")
    p.add_argument("--train-count", type=int, default=10)
    p.add_argument("--test-count", type=int, default=10)
    p.add_argument("--train-edges", nargs="*", help="edge-list files")
    p.add_argument("--test-edges", nargs="*", help="edge-list files")
    p.add_argument("--finetune-iters", type=int, default=50)
    p.add_argument("--save-params", help="write the trained encoder checkpoint here")
    p.set_defaults(fn=cmd_inductive)

    p = sub.add_parser("gradcheck", help="finite-difference audit of every backward rule")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("table", help="aggregate result JSONs into a table")
    p.add_argument("results_dir", nargs="?", default=None)
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.set_defaults(fn=cmd_table)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "table" and args.results_dir is None:
        import os
        args.results_dir = os.environ.get(RESULTS_ENV, "results")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.dump:
            print(f"diagnostics: iterations={exc.dump.get('iteration')}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
