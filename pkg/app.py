"""
PGANet desk toolkit - command-line entry point

Graph-generation benchmark, verification suites, toy re-identification
training, ablation sweeps and attention dumps. Every command writes its
artifacts into a fresh run directory under ``out_dir``.
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

# Core modules
from pganet.ablation import (
    evaluate_experiment, prepare_experiment, run_experiment,
    run_layer_sweep, run_neighbor_sweep, summarize_sweep
)
from pganet.config import ConfigError, RunConfig, load_run_config
from pganet.grid_graph import bench_generation, size_ladder
from pganet.model import load_checkpoint, model_forward, save_checkpoint
from pganet.pga import attention_to_frame
from pganet.retrieval_eval import metrics_frame
from pganet.run_store import RunStore
from pganet.tensor_core import ShapeError
from pganet.verification import reports_frame, run_all

# Utilities
from utils.export import export_report
from utils.visualization import (
    create_attention_heatmap, create_speed_figure, create_sweep_figure,
    create_training_figure, save_figure
)

logger = logging.getLogger("pganet.app")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
SECONDS_FORMAT = "%.6f"

# Commands
COMMANDS = [
    ("bench-graphgen", "Time the row-shift graph generator against the brute-force oracle"),
    ("verify", "Run oracle, attention, gradient and locality checks"),
    ("train", "Train the toy model on synthetic identities"),
    ("sweep", "Train and evaluate over PGA depths or neighbor modes"),
    ("dump-attention", "Write each layer's attention weights for one sample")
]


def show_table(title: str, df: pd.DataFrame) -> None:
    print(f"\n{title}")
    print(df.to_string(index=False, float_format=lambda v: f"{v:.6f}"))


def cmd_bench_graphgen(config: RunConfig, store: RunStore, args: argparse.Namespace) -> int:
    specs = size_ladder(config.bench_sizes)
    bench = pd.concat(
        [bench_generation(specs, mode, config.bench_repeats) for mode in config.bench_modes],
        ignore_index=True
    )
    store.commit_frame(
        "bench_graphgen.csv", bench, summary=f"{len(bench)} benchmark rows", float_format=SECONDS_FORMAT
    )
    save_figure(create_speed_figure(bench), store.path("bench_graphgen.html"))
    store.commit_file("bench_graphgen.html", summary="speed figure")
    show_table("Graph generation benchmark", bench)
    store.tables["Benchmark"] = bench
    return EXIT_OK


def cmd_verify(config: RunConfig, store: RunStore, args: argparse.Namespace) -> int:
    reports = run_all(config)
    frame = reports_frame(reports)
    store.commit_frame("verify.csv", frame, summary="suite results")
    show_table("Verification", frame[["suite", "checks", "failures", "status"]])
    for report in reports:
        for failure in report.failures:
            print(f"FAIL {report.suite}: {failure}")
    store.tables["Verification"] = frame
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILURE


def cmd_train(config: RunConfig, store: RunStore, args: argparse.Namespace) -> int:
    experiment = prepare_experiment(config)
    log = run_experiment(config, experiment)
    store.commit_frame("training_log.csv", log, summary=f"{config.epochs} epochs")

    save_checkpoint(store.path("checkpoint.npz"), experiment.model)
    store.commit_file("checkpoint.npz", summary=f"depth {experiment.model.depth} model")

    metrics = metrics_frame(evaluate_experiment(config, experiment))
    store.commit_frame("metrics.csv", metrics, summary="synthetic query/gallery retrieval")
    save_figure(create_training_figure(log), store.path("training.html"))
    store.commit_file("training.html", summary="training curves")

    show_table("Final epoch", log.tail(1))
    show_table("Retrieval", metrics)
    store.tables["Training log"] = log
    store.tables["Retrieval"] = metrics
    return EXIT_OK


def cmd_sweep(config: RunConfig, store: RunStore, args: argparse.Namespace) -> int:
    sweep = run_layer_sweep(config) if args.axis == "layers" else run_neighbor_sweep(config)
    summary = summarize_sweep(sweep)

    store.commit_frame(f"sweep_{args.axis}.csv", sweep, summary=f"{args.axis} sweep")
    store.commit_frame(f"sweep_{args.axis}_summary.csv", summary, summary="mean over seeds")
    save_figure(create_sweep_figure(sweep, title=f"{args.axis} sweep"), store.path(f"sweep_{args.axis}.html"))
    store.commit_file(f"sweep_{args.axis}.html", summary="sweep figure")

    show_table(f"Sweep over {args.axis}", summary)
    store.tables["Sweep"] = sweep
    store.tables["Summary"] = summary
    return EXIT_OK


def cmd_dump_attention(config: RunConfig, store: RunStore, args: argparse.Namespace) -> int:
    experiment = prepare_experiment(config)
    images = experiment.data.images
    if not 0 <= args.sample < len(images):
        raise ConfigError(f"sample index {args.sample} is outside [0, {len(images)})")
    try:
        load_checkpoint(args.checkpoint, experiment.model)
    except (ShapeError, OSError) as e:
        raise ConfigError(f"checkpoint {args.checkpoint} does not fit this configuration: {e}") from e

    sink: List[np.ndarray] = []
    model_forward(experiment.model, images[args.sample], mode="evaluation", attention_sink=sink)

    for layer, weights in enumerate(sink):
        frame = attention_to_frame(weights)
        name = f"attention_layer{layer}"
        store.commit_frame(f"{name}.csv", frame, summary=f"sample {args.sample}")
        save_figure(create_attention_heatmap(frame, weights.shape[0]), store.path(f"{name}.html"))
        store.commit_file(f"{name}.html", summary="attention heatmap")
        store.tables[f"Layer {layer}"] = frame

    print(f"Wrote {len(sink)} attention dumps for sample {args.sample}")
    return EXIT_OK


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig, RunStore, argparse.Namespace], int]] = {
    "bench-graphgen": cmd_bench_graphgen,
    "verify": cmd_verify,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "dump-attention": cmd_dump_attention
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=None, help="key = value configuration file")
    shared.add_argument("--seed", type=int, default=None, help="override the configured seed")
    shared.add_argument("--out", default=None, help="override the output directory")
    shared.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    shared.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(description="PGANet desk toolkit")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS:
        sub = commands.add_parser(name, parents=[shared], help=help_text)
        if name == "sweep":
            sub.add_argument("--axis", choices=["layers", "neighbors"], required=True)
        if name == "dump-attention":
            sub.add_argument("--checkpoint", required=True, help="checkpoint.npz written by train")
            sub.add_argument("--sample", type=int, default=0, help="dataset sample index")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, object]:
    overrides: Dict[str, object] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr
    )

    try:
        config = load_run_config(args.config, collect_overrides(args))
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG

    try:
        store = RunStore(config.out_dir, args.command, config)
    except OSError as e:
        logger.error("Cannot create run directory under %s: %s", config.out_dir, e)
        return EXIT_FAILURE

    try:
        status = COMMAND_HANDLERS[args.command](config, store, args)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG

    report = export_report(f"{args.command} run", store.tables, config.to_dict())
    store.commit_text("report.md", report, summary="run summary")
    store.export_manifest()
    print(f"\nArtifacts in {store.run_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
