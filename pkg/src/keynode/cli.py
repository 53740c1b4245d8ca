"""Command-line interface.

Subcommands mirror the pipeline stages plus orchestration helpers:

    ingest, stats, simulate, label, featurize, train, evaluate,
    generalize, compare-bins, importance, pipeline, emit-plots

Every invocation takes a JSON run configuration; CLI flags override the
matching config fields. Exit codes: 0 success, 1 configuration error,
2 stage failure, 3 dependency error.
"""

import argparse
import json
import sys
from pathlib import Path

from .backend import set_threads
from .evaluation import TaskId, cross_network_eval, load_report, save_report
from .graph import GraphError, compute_stats, load_edge_list
from .pipeline import (
    ConfigError,
    DependencyError,
    Logger,
    Pipeline,
    RunConfig,
    StageError,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STAGE = 2
EXIT_DEPENDENCY = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keynode",
        description="Influential-node classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--output-dir", help="override config output_dir")
        p.add_argument("--cache-dir", help="override config cache_dir")
        p.add_argument("--threads", type=int, help="worker threads for kernels")
        p.add_argument("--runs", type=int, help="cascades per (node, threshold)")
        p.add_argument("--trials", type=int, help="evaluation trials")
        p.add_argument("--master-seed", type=int, help="override config master_seed")
        p.add_argument("--log-json", action="store_true", help="machine-readable logs")

    for name in (
        "ingest",
        "simulate",
        "label",
        "featurize",
        "train",
        "compare-bins",
        "importance",
        "pipeline",
        "emit-plots",
    ):
        add_common(sub.add_parser(name))

    p_stats = sub.add_parser("stats", help="print topology statistics per network")
    add_common(p_stats)
    p_stats.add_argument("--largest-component-diameter", action="store_true")

    p_eval = sub.add_parser("evaluate")
    add_common(p_eval)
    p_eval.add_argument("--train", help="train network name (cross-network)")
    p_eval.add_argument("--test", help="test network name (cross-network)")
    p_eval.add_argument("--task", help="restrict to one task")
    p_eval.add_argument("--k", type=int, help="restrict to one bin count")

    add_common(sub.add_parser("generalize"))
    return parser


def _load_config(args) -> RunConfig:
    overrides = {
        "output_dir": args.output_dir,
        "cache_dir": args.cache_dir,
        "threads": args.threads,
        "runs": args.runs,
        "trials": args.trials,
        "master_seed": args.master_seed,
    }
    return RunConfig.from_json(args.config, overrides)


def _cmd_stats(config: RunConfig, args, log: Logger) -> int:
    out = {}
    for net in config.networks:
        g = load_edge_list(net.path, directed=net.directed)
        s = compute_stats(
            g, diameter_on_largest_component=args.largest_component_diameter
        )
        out[net.name] = {
            "nodes": s.nodes,
            "edges": s.edges,
            "avg_degree": s.avg_degree,
            "clustering_coefficient": s.clustering_coefficient,
            "diameter": s.diameter,
            "transitivity": s.transitivity,
        }
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_evaluate(config: RunConfig, args, log: Logger) -> int:
    pipe = Pipeline(config, log)
    if args.train and args.test and args.train != args.test:
        by_name = {n.name: n for n in config.networks}
        for name in (args.train, args.test):
            if name not in by_name:
                raise ConfigError(f"network {name!r} not in config")
        ds_a = pipe._load_dataset("generalize", by_name[args.train])
        ds_b = pipe._load_dataset("generalize", by_name[args.test])
        task = TaskId[args.task] if args.task else TaskId[config.tasks[0]]
        k = args.k if args.k else config.k_values[0]
        for spec in config.model_specs():
            rep = cross_network_eval(
                ds_a, ds_b, task, k, spec, master_seed=config.master_seed
            )
            path = (
                pipe.cache / "reports"
                / f"cross_{args.train}_{args.test}_{task.name}_k{k}_{spec.kind}.json"
            )
            path.parent.mkdir(exist_ok=True)
            save_report(rep, path)
            log.event("evaluate", f"wrote {path}", f1=rep.f1_macro_mean)
            print(path)
        return EXIT_OK
    pipe.stage_evaluate()
    return EXIT_OK


def _cmd_emit_plots(config: RunConfig, args, log: Logger) -> int:
    """Per-figure CSVs assembled from cached report JSONs."""
    pipe = Pipeline(config, log)
    report_dir = pipe.cache / "reports"
    if not report_dir.exists():
        raise DependencyError("emit-plots", "evaluate", "no reports directory")
    plots = Path(config.output_dir) / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    within, cross, bins = [], [], []
    for path in sorted(report_dir.glob("*.json")):
        if path.name.startswith("importance_"):
            continue
        rep = load_report(path)
        if path.name.startswith("within_"):
            within.append(rep)
        elif path.name.startswith("cross_"):
            cross.append(rep)
        elif path.name.startswith("bins_"):
            bins.append(rep)

    by_model = {}
    for rep in within + cross + bins:
        by_model.setdefault(rep.model, []).append(rep.f1_macro_mean)
    with open(plots / "model_comparison.csv", "wt", encoding="utf-8") as fh:
        fh.write("model,mean_f1\n")
        for model in sorted(by_model):
            vals = by_model[model]
            fh.write(f"{model},{sum(vals) / len(vals)!r}\n")

    with open(plots / "task_performance.csv", "wt", encoding="utf-8") as fh:
        fh.write("network,task,k,model,f1_mean,f1_std\n")
        for rep in within:
            fh.write(
                f"{rep.test_network},{rep.task},{rep.k},{rep.model},"
                f"{rep.f1_macro_mean!r},{rep.f1_macro_std!r}\n"
            )

    with open(plots / "generalization.csv", "wt", encoding="utf-8") as fh:
        fh.write("train,test,task,k,model,f1\n")
        for rep in cross:
            fh.write(
                f"{rep.train_network},{rep.test_network},{rep.task},{rep.k},"
                f"{rep.model},{rep.f1_macro_mean!r}\n"
            )

    with open(plots / "binning_comparison.csv", "wt", encoding="utf-8") as fh:
        fh.write("network,task,model,method,f1_mean,f1_std\n")
        for rep in bins:
            fh.write(
                f"{rep.test_network},{rep.task},{rep.model},"
                f"{rep.meta.get('label_method')},{rep.f1_macro_mean!r},"
                f"{rep.f1_macro_std!r}\n"
            )

    for path in sorted(report_dir.glob("importance_*.csv")):
        (plots / path.name).write_text(path.read_text())
    log.event("emit-plots", f"plot data written to {plots}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    log = Logger(json_lines=getattr(args, "log_json", False))
    try:
        config = _load_config(args)
        if config.threads:
            set_threads(config.threads)
        if args.command == "stats":
            return _cmd_stats(config, args, log)
        if args.command == "evaluate":
            return _cmd_evaluate(config, args, log)
        if args.command == "emit-plots":
            return _cmd_emit_plots(config, args, log)
        pipe = Pipeline(config, log)
        if args.command == "pipeline":
            manifest = pipe.run_all()
            print(manifest)
            return EXIT_OK
        pipe.run_stage(args.command)
        return EXIT_OK
    except ConfigError as exc:
        log.event("config", f"error: {exc}")
        return EXIT_CONFIG
    except DependencyError as exc:
        log.event(exc.stage, str(exc))
        return EXIT_DEPENDENCY
    except (StageError, GraphError) as exc:
        log.event("stage", f"error: {exc}")
        return EXIT_STAGE
    except Exception as exc:  # stage failures of any stripe
        log.event("stage", f"unexpected failure: {exc.__class__.__name__}: {exc}")
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
