#!/usr/bin/env python3
"""Sweep the transition scale and print the overlap index per sigma.

Uses a 35-task equal-size reference schedule (B=10, 40 batches per task) by
default so the sweep is dataset-free; pass --config to sweep a real run
configuration instead.

Usage:
    python3 scripts/sigma_sweep.py --sigmas 1,3,10,20,40 [--tau 0.95]
    python3 scripts/sigma_sweep.py --config configs/synth_small.json --curve-dir out/curves
"""

import argparse
import json
from pathlib import Path

import numpy as np

import mixstream as ms
from mixstream.cli import build_run_dataset, parse_config


def reference_partition(tasks=35, batches_per_task=40, batch_size=10):
    from mixstream.graphs import Task, TaskPartition
    n = batches_per_task * batch_size
    members = []
    labels = []
    cursor = 0
    for k in range(tasks):
        train = np.arange(cursor, cursor + n, dtype=np.int64)
        cursor += n
        members.append(Task(class_ids=(2 * k, 2 * k + 1), train_nodes=train,
                            test_nodes=np.array([cursor - 1])))
        labels.extend([2 * k] * n)
    return TaskPartition(tasks=tuple(members), classes_per_task=2,
                         node_labels=np.asarray(labels, dtype=np.int64))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sigmas", default="1,2,3,5,10,15,20,30,40")
    parser.add_argument("--tau", type=float, default=0.95)
    parser.add_argument("--config", help="sweep this run config's dataset instead")
    parser.add_argument("--curve-dir", help="write one mixing-curve CSV per sigma")
    args = parser.parse_args()
    sigmas = [float(s) for s in args.sigmas.split(",")]

    if args.config:
        cfg = parse_config(json.loads(Path(args.config).read_text()))
        ds = build_run_dataset(cfg)
        part = ms.partition_tasks(ds, cfg.classes_per_task)
        batch = int(cfg.schedule.get("batch_size", 10))
        print(f"dataset {ds.name}: {part.task_count} tasks")
    else:
        part = reference_partition()
        batch = 10
        print("reference schedule: 35 equal tasks, 40 batches each")

    hard = ms.build_schedule(part, ms.ScheduleConfig(mode="hard", batch_size=batch))
    print(f"T = {hard.stream_length}, tau = {args.tau:g}")
    print(f"{'sigma':>8} {'overlap':>8}")
    print(f"{'hard':>8} {ms.overlap_index(hard, args.tau):>8.4f}")
    for sigma in sigmas:
        sched = ms.build_schedule(
            part, ms.ScheduleConfig(mode="gaussian", batch_size=batch, sigma=sigma))
        print(f"{sigma:>8g} {ms.overlap_index(sched, args.tau):>8.4f}")
        if args.curve_dir:
            out = Path(args.curve_dir)
            out.mkdir(parents=True, exist_ok=True)
            ms.export_mixing_curve(sched, out / f"curve_sigma_{sigma:g}.csv")


if __name__ == "__main__":
    main()
