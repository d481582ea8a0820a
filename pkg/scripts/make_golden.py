#!/usr/bin/env python3
"""Regenerate the golden interchange files shared with external consumers.

Emits, under golden/:
  config.json             self-contained run config for the golden dataset
  stream_<mode>.txt       one canonical stream file per transition mode
  predictions.csv         a prediction log from an in-process ER run
  expected_matrix.csv     core-scored accuracy matrix for that log

External components (the training bridge) must read every stream file,
re-serialize it byte-identically, and produce prediction logs the core
scores to exactly the expected matrix. Regenerate only when the formats
change, and commit the result.
"""

import json
from pathlib import Path

import mixstream as ms

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "golden"

DATASET = {
    "kind": "synth", "classes": 6, "nodes_per_class": 25, "feature_dim": 4,
    "class_center_separation": 6.0, "intra_edge_prob": 0.1, "inter_edge_prob": 0.01,
    "seed": 21, "test_fraction": 0.2, "name": "golden",
}
SEED = 1


def main():
    GOLDEN.mkdir(exist_ok=True)
    spec = ms.SynthSpec(**{k: v for k, v in DATASET.items() if k != "kind"})
    ds = ms.synth_dataset(spec)
    part = ms.partition_tasks(ds, 2)

    config = {
        "dataset": DATASET,
        "classes_per_task": 2,
        "schedule": {"mode": "gaussian", "batch_size": 10, "sigma": 4.0},
        "sampling": "without",
        "learner": "er",
        "train": {"hops": 0, "learning_rate": 0.005},
        "eval_interval": 5,
        "seeds": [SEED],
        "output_dir": "out",
    }
    (GOLDEN / "config.json").write_text(
        json.dumps(config, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    streams = {
        "hard": ms.build_stream(
            ds, part, ms.build_schedule(part, ms.ScheduleConfig(mode="hard", batch_size=10)),
            "without", SEED),
        "gaussian": ms.build_stream(
            ds, part,
            ms.build_schedule(part, ms.ScheduleConfig(mode="gaussian", batch_size=10,
                                                      sigma=4.0)),
            "without", SEED),
        "global_mix": ms.build_global_mix_stream(ds, part, 10, 0.3, SEED),
        "boundary_local": ms.build_boundary_local_stream(ds, part, 10, 1, SEED),
    }
    for mode, stream in streams.items():
        ms.write_stream(stream, GOLDEN / f"stream_{mode}.txt")
        print(f"stream_{mode}.txt: T={stream.length}, items={stream.item_count()}")

    feats = ms.propagate_features(ds, 0)
    learner = ms.OnlineLearner("er", ds.class_count, feats.matrix.shape[1],
                               ms.TrainConfig(hops=0, seed=SEED), feats.matrix, SEED)
    matrix = ms.evaluate_stream(learner, streams["gaussian"], part, feats.matrix,
                                delta=5, log_path=GOLDEN / "predictions.csv")
    scored = ms.score_prediction_log(GOLDEN / "predictions.csv", part)
    assert abs(scored.values - matrix.values).max() <= 1e-12
    ms.export_accuracy_matrix(scored, GOLDEN / "expected_matrix.csv")
    print(f"predictions.csv: {matrix.eval_steps.size} eval steps, "
          f"{sum(t.test_nodes.size for t in part.tasks)} test nodes each")


if __name__ == "__main__":
    main()
