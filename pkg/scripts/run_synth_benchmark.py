#!/usr/bin/env python3
"""Run the reference learners over a synthetic stream suite and print a table.

Covers bare / er / agem / joint across hard and gaussian transitions,
averaged over seeds. This is the desk-scale analogue of the full benchmark
protocol: same batch size, memory budget, replay ratio, and one pass per
incoming batch.

Usage:
    python3 scripts/run_synth_benchmark.py [--seeds 1,2,3,4,5] [--sigma 20]
"""

import argparse

import numpy as np

import mixstream as ms


def run_stream_learner(ds, part, feats, kind, mode, seed, sigma, delta):
    sc = ms.ScheduleConfig(mode=mode, batch_size=10, seed=seed,
                           sigma=sigma if mode == "gaussian" else None)
    stream = ms.build_stream(ds, part, ms.build_schedule(part, sc), "without", seed)
    learner = ms.OnlineLearner(kind, ds.class_count, feats.matrix.shape[1],
                               ms.TrainConfig(hops=0, seed=seed), feats.matrix, seed)
    matrix = ms.evaluate_stream(learner, stream, part, feats.matrix, delta=delta)
    return ms.seed_result(matrix, seed)


def run_joint(ds, part, feats, seed):
    model = ms.train_joint(ds, part, ms.TrainConfig(hops=0, seed=seed), feats)
    accs = [(ms.predict(model, feats.matrix, t.test_nodes)
             == part.node_labels[t.test_nodes]).mean() for t in part.tasks]
    return float(np.mean(accs))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", default="1,2,3,4,5")
    parser.add_argument("--sigma", type=float, default=20.0)
    parser.add_argument("--delta", type=int, default=5)
    args = parser.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]

    ds = ms.synth_dataset(ms.SynthSpec(
        classes=10, nodes_per_class=100, feature_dim=3,
        class_center_separation=10.0, intra_edge_prob=0.1, inter_edge_prob=0.005,
        seed=7, test_fraction=0.2, name="synth-small"))
    part = ms.partition_tasks(ds, 2)
    feats = ms.propagate_features(ds, 0)
    stats = ms.graph_stats(ds, part)
    print(f"dataset: {stats.node_count} nodes, {stats.edge_count} edges, "
          f"{stats.class_count} classes, {stats.task_count} tasks, h={stats.homophily:.2f}")
    print(f"seeds {seeds}, B=10, memory 100, one pass per batch, SGD lr 5e-3\n")

    header = f"{'method':<8} {'transition':<14} {'AA':>8} {'AF':>8} {'A_AUC':>8} {'AF_s':>8}"
    print(header)
    print("-" * len(header))
    for mode, sigma in (("hard", None), ("gaussian", args.sigma)):
        label = mode if mode == "hard" else f"gaussian s={args.sigma:g}"
        for kind in ("bare", "er", "agem"):
            rs = [run_stream_learner(ds, part, feats, kind, mode, s, sigma, args.delta)
                  for s in seeds]
            agg = ms.aggregate_seeds(rs)
            print(f"{kind:<8} {label:<14} {agg.mean['aa']:>8.3f} "
                  f"{agg.mean['af_signed']:>8.3f} {agg.mean['a_auc']:>8.3f} "
                  f"{agg.mean['af_s']:>8.3f}")
    joint = np.mean([run_joint(ds, part, feats, s) for s in seeds])
    print(f"{'joint':<8} {'(offline)':<14} {joint:>8.3f} {'-':>8} {'-':>8} {'-':>8}")


if __name__ == "__main__":
    main()
