"""Operator surface: ingest -> gen-stream -> run -> eval -> report.

Every command takes a JSON config (sorted-key canonical text) plus a few
overriding flags, derives all randomness from the config seeds, and writes
its outputs under ``<output_dir>/<dataset>/<mode>/<seed>/``. The effective
merged config is echoed into every directory it touches so any artifact can
be regenerated from what sits next to it.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .graphs import (
    DataError,
    GraphDataset,
    SynthSpec,
    graph_stats,
    load_dataset,
    partition_tasks,
    split_train_test,
    synth_dataset,
    write_dataset,
)
from .learners import NumericError, OnlineLearner, TrainConfig, predict, \
    propagate_features, save_checkpoint, train_joint
from .metrics import (
    SeedResult,
    aggregate_seeds,
    evaluate_stream,
    export_accuracy_matrix,
    format_report,
    report_json,
    score_prediction_log,
    seed_result,
    seed_result_json,
)
from .sampler import (
    SamplerError,
    build_boundary_local_stream,
    build_global_mix_stream,
    build_stream,
)
from .schedule import (
    DEFAULT_DOMINANCE_THRESHOLD,
    ScheduleConfig,
    ScheduleError,
    build_schedule,
    export_mixing_curve,
    overlap_index,
)
from .streamio import StreamFileError, read_stream, write_stream

OUTPUT_ENV = "MIXSTREAM_OUT"

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    """Invalid or missing configuration (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    dataset: dict
    classes_per_task: int
    schedule: dict
    sampling: str
    learner: str
    train: TrainConfig
    eval_interval: int
    seeds: tuple[int, ...]
    output_dir: Path
    split_seed: int
    tau: float

    @property
    def dataset_name(self) -> str:
        return self.dataset.get("name") or Path(self.dataset.get("path", "dataset")).name

    @property
    def mode(self) -> str:
        return self.schedule["mode"]


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def parse_config(raw: dict) -> RunConfig:
    _require(isinstance(raw, dict), "config must be a JSON object")
    _require("dataset" in raw, "config requires a 'dataset' section")
    dataset = raw["dataset"]
    _require(isinstance(dataset, dict) and dataset.get("kind") in ("synth", "csv"),
             "dataset.kind must be 'synth' or 'csv'")
    if dataset["kind"] == "csv":
        _require("path" in dataset, "csv dataset requires 'path'")

    schedule = raw.get("schedule", {})
    _require(isinstance(schedule, dict) and "mode" in schedule,
             "config requires schedule.mode")
    sampling = raw.get("sampling", "without")
    _require(sampling in ("without", "with"), "sampling must be 'without' or 'with'")
    learner = raw.get("learner", "bare")
    _require(learner in ("bare", "er", "agem", "joint"),
             "learner must be one of bare/er/agem/joint")
    seeds = tuple(int(s) for s in raw.get("seeds", [1, 2, 3]))
    _require(len(seeds) >= 1, "seeds must be nonempty")
    eval_interval = int(raw.get("eval_interval", 1))
    _require(eval_interval >= 1, "eval_interval must be >= 1")

    out = raw.get("output_dir") or os.environ.get(OUTPUT_ENV) or "out"
    try:
        train = TrainConfig(**raw.get("train", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train section: {exc}") from None
    tau = float(raw.get("tau", DEFAULT_DOMINANCE_THRESHOLD))

    cpt = int(raw.get("classes_per_task", 2))
    return RunConfig(
        dataset=dataset,
        classes_per_task=cpt,
        schedule=schedule,
        sampling=sampling,
        learner=learner,
        train=train,
        eval_interval=eval_interval,
        seeds=seeds,
        output_dir=Path(out),
        split_seed=int(raw.get("split_seed", 0)),
        tau=tau,
    )


def load_raw_config(args: argparse.Namespace) -> dict:
    if not args.config:
        raise ConfigError("--config is required")
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    # flag overrides
    if getattr(args, "output_dir", None):
        raw["output_dir"] = args.output_dir
    if getattr(args, "seeds", None):
        raw["seeds"] = [int(s) for s in args.seeds.split(",") if s]
    if getattr(args, "learner", None):
        raw["learner"] = args.learner
    if getattr(args, "sampling", None):
        raw["sampling"] = args.sampling
    if getattr(args, "eval_interval", None):
        raw["eval_interval"] = args.eval_interval
    sched = raw.setdefault("schedule", {})
    if getattr(args, "mode", None):
        sched["mode"] = args.mode
        # a mode override invalidates parameters of the previous mode
        for key in ("sigma", "mix_fraction", "window_batches"):
            if key in sched and key not in _mode_params(args.mode):
                del sched[key]
    if getattr(args, "sigma", None) is not None:
        sched["sigma"] = args.sigma
    if getattr(args, "mix_fraction", None) is not None:
        sched["mix_fraction"] = args.mix_fraction
    if getattr(args, "window_batches", None) is not None:
        sched["window_batches"] = args.window_batches
    if getattr(args, "tau", None) is not None:
        raw["tau"] = args.tau
    return raw


def _mode_params(mode: str) -> tuple[str, ...]:
    return {
        "hard": (),
        "gaussian": ("sigma",),
        "global_mix": ("mix_fraction",),
        "boundary_local": ("window_batches",),
    }.get(mode, ())


def schedule_config(cfg: RunConfig, seed: int) -> ScheduleConfig:
    s = cfg.schedule
    try:
        return ScheduleConfig(
            mode=s["mode"],
            batch_size=int(s.get("batch_size", 10)),
            sigma=float(s["sigma"]) if "sigma" in s else None,
            mix_fraction=float(s["mix_fraction"]) if "mix_fraction" in s else None,
            window_batches=int(s["window_batches"]) if "window_batches" in s else None,
            seed=seed,
        )
    except ScheduleError as exc:
        raise ConfigError(str(exc)) from None


def build_run_dataset(cfg: RunConfig) -> GraphDataset:
    d = cfg.dataset
    if d["kind"] == "synth":
        fields = {k: v for k, v in d.items() if k != "kind"}
        try:
            spec = SynthSpec(**fields)
        except TypeError as exc:
            raise ConfigError(f"bad synth dataset spec: {exc}") from None
        return synth_dataset(spec)
    ds = load_dataset(d["path"], name=d.get("name"))
    return split_train_test(ds, float(d.get("test_fraction", 0.2)), cfg.split_seed)


def build_run_stream(cfg: RunConfig, ds, partition, seed: int):
    sc = schedule_config(cfg, seed)
    if sc.mode in ("hard", "gaussian"):
        return build_stream(ds, partition, build_schedule(partition, sc), cfg.sampling, seed)
    if sc.mode == "global_mix":
        return build_global_mix_stream(ds, partition, sc.batch_size, sc.mix_fraction, seed)
    return build_boundary_local_stream(ds, partition, sc.batch_size, sc.window_batches, seed)


def seed_dir(cfg: RunConfig, seed: int) -> Path:
    return cfg.output_dir / cfg.dataset_name / cfg.mode / str(seed)


def echo_config(raw: dict, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.json").write_text(
        json.dumps(raw, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_ingest(raw: dict, cfg: RunConfig, args) -> int:
    ds = build_run_dataset(cfg)
    partition = partition_tasks(ds, cfg.classes_per_task)
    stats = graph_stats(ds, partition)
    batch = int(cfg.schedule.get("batch_size", 10))
    total = sum(int(np.ceil(n / batch)) for n in partition.train_counts())
    print(f"dataset       {ds.name}")
    print(f"nodes         {stats.node_count}")
    print(f"edges         {stats.edge_count}")
    print(f"classes       {stats.class_count}")
    print(f"tasks         {stats.task_count}")
    homo = f"{stats.homophily:.4f}" if stats.homophily_defined else "undefined (no edges)"
    print(f"homophily     {homo}")
    print(f"avg degree    {stats.avg_degree:.2f}")
    print(f"density       {stats.density:.6f}")
    print(f"train/test    {int(ds.train_mask.sum())}/{int(ds.test_mask.sum())}")
    print(f"stream length {total} (B={batch})")
    if args.write:
        write_dataset(ds, args.write)
        print(f"wrote dataset CSVs to {args.write}")
    return 0


def cmd_gen_stream(raw: dict, cfg: RunConfig, args) -> int:
    ds = build_run_dataset(cfg)
    partition = partition_tasks(ds, cfg.classes_per_task)
    for seed in cfg.seeds:
        stream = build_run_stream(cfg, ds, partition, seed)
        out = seed_dir(cfg, seed)
        echo_config(raw, out)
        write_stream(stream, out / "stream.txt")
        print(f"seed {seed}: {out / 'stream.txt'} ({stream.length} batches, "
              f"{stream.item_count()} items)")
    return 0


def cmd_inspect(raw: dict, cfg: RunConfig, args) -> int:
    ds = build_run_dataset(cfg)
    partition = partition_tasks(ds, cfg.classes_per_task)
    stats = graph_stats(ds, partition)
    sc = schedule_config(cfg, cfg.seeds[0])
    schedule = build_schedule(partition, sc)
    homo = f"{stats.homophily:.4f}" if stats.homophily_defined else "undefined"
    print(f"dataset {ds.name}: {stats.node_count} nodes, {stats.edge_count} edges, "
          f"{stats.class_count} classes, {stats.task_count} tasks, h={homo}")
    print(f"schedule {sc.mode}: T={schedule.stream_length}, B={sc.batch_size}")
    if schedule.weights is not None:
        print(f"overlap index (tau={cfg.tau:g}): {overlap_index(schedule, cfg.tau):.4f}")
        if args.curve:
            export_mixing_curve(schedule, args.curve)
            print(f"mixing curve written to {args.curve}")
    else:
        print(f"overlap index: undefined for mode {sc.mode!r} (sample-pool mixing)")
    return 0


def cmd_run(raw: dict, cfg: RunConfig, args) -> int:
    ds = build_run_dataset(cfg)
    partition = partition_tasks(ds, cfg.classes_per_task)
    features = propagate_features(ds, cfg.train.hops)
    for seed in cfg.seeds:
        out = seed_dir(cfg, seed)
        echo_config(raw, out)
        if cfg.learner == "joint":
            train_cfg = TrainConfig(**{**raw.get("train", {}), "seed": seed})
            model = train_joint(ds, partition, train_cfg, features)
            rows = []
            for task in partition.tasks:
                preds = predict(model, features.matrix, task.test_nodes)
                rows.extend((1, int(n), int(p)) for n, p in zip(task.test_nodes, preds))
            metrics_mod.write_prediction_log(rows, out / "predictions.csv")
            save_checkpoint(model, out / "checkpoint.txt")
            print(f"seed {seed}: joint model trained, log at {out / 'predictions.csv'}")
            continue
        stream_path = out / "stream.txt"
        if not stream_path.is_file():
            raise DataError(f"{stream_path} not found; run gen-stream first")
        stream = read_stream(stream_path)
        learner = OnlineLearner(cfg.learner, ds.class_count, features.matrix.shape[1],
                                cfg.train, features.matrix, seed)
        matrix = evaluate_stream(learner, stream, partition, features.matrix,
                                 cfg.eval_interval, log_path=out / "predictions.csv")
        save_checkpoint(learner.model, out / "checkpoint.txt")
        export_accuracy_matrix(matrix, out / "accuracy_matrix.csv")
        print(f"seed {seed}: aa={metrics_mod.compute_aa(matrix):.4f} "
              f"auc={metrics_mod.compute_auc(matrix):.4f} "
              f"af={metrics_mod.compute_af(matrix):.4f}")
    return 0


def cmd_eval(raw: dict, cfg: RunConfig, args) -> int:
    ds = build_run_dataset(cfg)
    partition = partition_tasks(ds, cfg.classes_per_task)
    if args.log:
        matrix = score_prediction_log(args.log, partition)
        if args.matrix_out:
            export_accuracy_matrix(matrix, args.matrix_out)
            print(f"matrix written to {args.matrix_out}")
        result = seed_result(matrix, seed=-1)
        sys.stdout.write(seed_result_json(result))
        return 0
    for seed in cfg.seeds:
        out = seed_dir(cfg, seed)
        log = out / "predictions.csv"
        if not log.is_file():
            raise DataError(f"{log} not found; run 'run' first")
        matrix = score_prediction_log(log, partition)
        result = seed_result(matrix, seed)
        (out / "metrics.json").write_text(seed_result_json(result), encoding="utf-8")
        export_accuracy_matrix(matrix, out / "accuracy_matrix.csv")
        print(f"seed {seed}: aa={result.aa:.4f} auc={result.a_auc:.4f} "
              f"af={result.af_signed:.4f} af_s={result.af_s:.4f}")
    return 0


def cmd_report(raw: dict, cfg: RunConfig, args) -> int:
    results = []
    for seed in cfg.seeds:
        path = seed_dir(cfg, seed) / "metrics.json"
        if not path.is_file():
            raise DataError(f"{path} not found; run 'eval' first")
        payload = json.loads(path.read_text(encoding="utf-8"))
        results.append(SeedResult(
            seed=int(payload["seed"]),
            aa=float(payload["aa"]),
            af_signed=float(payload["af_signed"]),
            a_auc=float(payload["a_auc"]),
            af_s=float(payload["af_s"]),
        ))
    report = aggregate_seeds(results)
    base = cfg.output_dir / cfg.dataset_name / cfg.mode
    base.mkdir(parents=True, exist_ok=True)
    (base / "report.json").write_text(report_json(report), encoding="utf-8")
    with (base / "report.csv").open("w", encoding="utf-8") as fh:
        fh.write("metric,mean,std,n\n")
        for name in metrics_mod.METRIC_NAMES:
            fh.write(f"{name},{report.mean[name]:.9g},{report.std[name]:.9g},"
                     f"{len(report.results)}\n")
    text = format_report(report)
    (base / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixstream",
        description="Generate task-free graph streams, run online learners, score them.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--output-dir", help="override output directory")
        p.add_argument("--seeds", help="comma-separated seed list override")
        p.add_argument("--mode", choices=("hard", "gaussian", "global_mix", "boundary_local"))
        p.add_argument("--sigma", type=float)
        p.add_argument("--mix-fraction", dest="mix_fraction", type=float)
        p.add_argument("--window-batches", dest="window_batches", type=int)
        p.add_argument("--learner", choices=("bare", "er", "agem", "joint"))
        p.add_argument("--sampling", choices=("without", "with"))
        p.add_argument("--eval-interval", dest="eval_interval", type=int)

    p = sub.add_parser("ingest", help="validate a dataset and print its statistics")
    common(p)
    p.add_argument("--write", help="also write canonical nodes.csv/edges.csv here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gen-stream", help="materialize stream files for every seed")
    common(p)
    p.set_defaults(func=cmd_gen_stream)

    p = sub.add_parser("inspect", help="overlap index, mixing curve, graph stats")
    common(p)
    p.add_argument("--tau", type=float, help="dominance threshold for the overlap index")
    p.add_argument("--curve", help="write the mixing-curve CSV here")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("run", help="drive the configured learner over stored streams")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score prediction logs into metric reports")
    common(p)
    p.add_argument("--log", help="score this standalone prediction log instead")
    p.add_argument("--matrix-out", dest="matrix_out",
                   help="with --log: write the accuracy matrix CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="aggregate per-seed metrics into a table")
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        raw = load_raw_config(args)
        cfg = parse_config(raw)
        return args.func(raw, cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, StreamFileError, SamplerError, ScheduleError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
