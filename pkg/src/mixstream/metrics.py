"""Accuracy matrix along the stream and the metric suite over it.

After every ``delta``-th batch (and always after the final batch) the model
is evaluated on the test sets of all latent tasks, giving one matrix row.
All metrics reduce this matrix:

* aa        - mean final-row accuracy across tasks
* af_signed - mean (final - peak) per task; <= 0, higher is better
* a_auc     - mean accuracy over the delta-grid rows
* af_s      - the boundary-free forgetting readout; same functional form as
              af_signed, computed on the delta-spaced grid the matrix stores

``af_signed`` is reported signed so that its orientation matches
higher-is-better tables; the unsigned variant is exposed separately.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import DataError, TaskPartition
from .learners import OnlineLearner, learner_view
from .sampler import Stream


class PredictionLogError(DataError):
    """Malformed or inconsistent prediction log."""


@dataclass(frozen=True)
class AccuracyMatrix:
    """Rows are evaluation points (after ``eval_steps[i]`` batches), columns tasks."""

    values: np.ndarray          # (rows, K) in [0, 1]
    eval_steps: np.ndarray      # (rows,) strictly increasing, last == total_batches
    delta: int
    total_batches: int

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != self.eval_steps.size:
            raise ValueError("values and eval_steps disagree on row count")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("accuracies must lie in [0, 1]")
        if self.eval_steps.size == 0:
            raise ValueError("matrix needs at least one evaluation row")
        if (np.diff(self.eval_steps) <= 0).any():
            raise ValueError("eval_steps must be strictly increasing")

    @property
    def task_count(self) -> int:
        return self.values.shape[1]

    def grid_rows(self) -> np.ndarray:
        """Indices of the delta-grid rows delta, 2*delta, ..., M*delta."""
        m = self.total_batches // self.delta
        grid = (self.eval_steps % self.delta == 0) & (self.eval_steps <= m * self.delta)
        if not grid.any():     # delta longer than the stream: fall back to what exists
            return np.arange(self.eval_steps.size)
        return np.nonzero(grid)[0]


def eval_points(total_batches: int, delta: int) -> list[int]:
    """Batch counts after which evaluation runs; the final batch is always one."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    points = list(range(delta, total_batches + 1, delta))
    if not points or points[-1] != total_batches:
        points.append(total_batches)
    return points


def measure_accuracy(learner, partition: TaskPartition, features: np.ndarray):
    """Per-task test accuracies and raw predictions; never mutates the learner."""
    labels = partition.node_labels
    row: list[float] = []
    preds_by_task: list[np.ndarray] = []
    for task in partition.tasks:
        preds = learner.predict_nodes(features, task.test_nodes)
        preds_by_task.append(preds)
        row.append(float((preds == labels[task.test_nodes]).mean()))
    return row, preds_by_task


def evaluate_stream(
    learner: OnlineLearner,
    stream: Stream,
    partition: TaskPartition,
    features: np.ndarray,
    delta: int = 1,
    log_path: str | Path | None = None,
) -> AccuracyMatrix:
    """Drive the learner down the stream, measuring on the way.

    Measurement never mutates the learner. When ``log_path`` is given, every
    per-node prediction at every evaluation point is appended to a CSV log
    that :func:`score_prediction_log` reproduces this matrix from.
    """
    for k, task in enumerate(partition.tasks):
        if task.test_nodes.size == 0:
            raise ValueError(f"task {k} has an empty test set")
    points = set(eval_points(stream.length, delta))
    labels = partition.node_labels

    rows: list[list[float]] = []
    steps: list[int] = []
    log_rows: list[tuple[int, int, int]] = []
    for batch in stream.batches:
        learner.observe(learner_view(batch, features, labels))
        i = batch.index + 1
        if i in points:
            row, preds_by_task = measure_accuracy(learner, partition, features)
            if log_path is not None:
                for task, preds in zip(partition.tasks, preds_by_task):
                    log_rows.extend(
                        (i, int(n), int(p)) for n, p in zip(task.test_nodes, preds))
            rows.append(row)
            steps.append(i)

    if log_path is not None:
        write_prediction_log(log_rows, log_path)
    return AccuracyMatrix(
        values=np.asarray(rows, dtype=np.float64),
        eval_steps=np.asarray(steps, dtype=np.int64),
        delta=delta,
        total_batches=stream.length,
    )


def write_prediction_log(records, path: str | Path) -> None:
    """Write ``eval_step,node_index,predicted_class`` rows with a header."""
    seen = set()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eval_step", "node_index", "predicted_class"])
        for step, node, pred in records:
            key = (int(step), int(node))
            if key in seen:
                raise PredictionLogError(f"duplicate prediction for {key}")
            seen.add(key)
            writer.writerow([int(step), int(node), int(pred)])


def score_prediction_log(log_path: str | Path, partition: TaskPartition) -> AccuracyMatrix:
    """Rebuild the accuracy matrix from a prediction log.

    Every evaluation step must cover every task's test nodes exactly once;
    predictions for non-test nodes are rejected.
    """
    node_task = {}
    for k, task in enumerate(partition.tasks):
        for n in task.test_nodes.tolist():
            node_task[n] = k
    labels = partition.node_labels

    by_step: dict[int, dict[int, int]] = {}
    path = Path(log_path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["eval_step", "node_index", "predicted_class"]:
            raise PredictionLogError(f"{path}: bad or missing header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise PredictionLogError(f"{path}:{lineno}: expected 3 fields")
            try:
                step, node, pred = int(row[0]), int(row[1]), int(row[2])
            except ValueError:
                raise PredictionLogError(f"{path}:{lineno}: non-integer field") from None
            if node not in node_task:
                raise PredictionLogError(
                    f"{path}:{lineno}: node {node} is not a test node")
            group = by_step.setdefault(step, {})
            if node in group:
                raise PredictionLogError(
                    f"{path}:{lineno}: duplicate prediction for step {step}, node {node}")
            group[node] = pred
    if not by_step:
        raise PredictionLogError(f"{path}: log holds no predictions")

    steps = sorted(by_step)
    expected = len(node_task)
    rows = []
    for step in steps:
        group = by_step[step]
        if len(group) != expected:
            missing = next(iter(set(node_task) - set(group)))
            raise PredictionLogError(
                f"{path}: step {step} misses predictions (e.g. node {missing})")
        row = []
        for task in partition.tasks:
            nodes = task.test_nodes
            correct = sum(1 for n in nodes.tolist() if group[n] == int(labels[n]))
            row.append(correct / nodes.size)
        rows.append(row)
    return AccuracyMatrix(
        values=np.asarray(rows, dtype=np.float64),
        eval_steps=np.asarray(steps, dtype=np.int64),
        delta=int(steps[0]),
        total_batches=int(steps[-1]),
    )


def compute_aa(m: AccuracyMatrix) -> float:
    """Mean accuracy across tasks at the final evaluation point."""
    return float(m.values[-1].mean())


def compute_af(m: AccuracyMatrix) -> float:
    """Signed mean (final - peak) per task; 0 means no forgetting."""
    return float((m.values[-1] - m.values.max(axis=0)).mean())


def compute_af_unsigned(m: AccuracyMatrix) -> float:
    return -compute_af(m)


def compute_af_s(m: AccuracyMatrix) -> float:
    """Boundary-free forgetting over the delta-spaced evaluation grid."""
    return compute_af(m)


def compute_auc(m: AccuracyMatrix) -> float:
    """Mean accuracy over the delta-grid evaluation points."""
    return float(m.values[m.grid_rows()].mean(axis=1).mean())


@dataclass(frozen=True)
class SeedResult:
    seed: int
    aa: float
    af_signed: float
    a_auc: float
    af_s: float


METRIC_NAMES = ("aa", "af_signed", "a_auc", "af_s")


def seed_result(m: AccuracyMatrix, seed: int) -> SeedResult:
    return SeedResult(
        seed=seed,
        aa=compute_aa(m),
        af_signed=compute_af(m),
        a_auc=compute_auc(m),
        af_s=compute_af_s(m),
    )


@dataclass(frozen=True)
class MetricReport:
    results: tuple[SeedResult, ...]
    mean: dict[str, float]
    std: dict[str, float]


def aggregate_seeds(results) -> MetricReport:
    """Mean and unbiased std per metric; a single seed reports std 0."""
    results = tuple(results)
    if not results:
        raise ValueError("need at least one seed result")
    mean = {}
    std = {}
    for name in METRIC_NAMES:
        vals = np.asarray([getattr(r, name) for r in results], dtype=np.float64)
        mean[name] = float(vals.mean())
        std[name] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return MetricReport(results=results, mean=mean, std=std)


def export_accuracy_matrix(m: AccuracyMatrix, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eval_step"] + [f"acc_{k}" for k in range(m.task_count)])
        for step, row in zip(m.eval_steps, m.values):
            writer.writerow([int(step)] + [f"{v:.9g}" for v in row])


def seed_result_json(result: SeedResult) -> str:
    payload = {name: getattr(result, name) for name in METRIC_NAMES}
    payload["seed"] = result.seed
    return json.dumps(payload, sort_keys=True) + "\n"


def report_json(report: MetricReport) -> str:
    payload = {
        "mean": report.mean,
        "std": report.std,
        "seeds": [r.seed for r in report.results],
        "per_seed": {name: [getattr(r, name) for r in report.results]
                     for name in METRIC_NAMES},
    }
    return json.dumps(payload, sort_keys=True) + "\n"


def format_report(report: MetricReport) -> str:
    lines = [f"{'metric':<10} {'mean':>10} {'std':>10}  (n={len(report.results)})"]
    for name in METRIC_NAMES:
        lines.append(f"{name:<10} {report.mean[name]:>10.4f} {report.std[name]:>10.4f}")
    return "\n".join(lines) + "\n"
