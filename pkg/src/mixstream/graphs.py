"""Graph datasets: loading, synthesis, splitting, latent-task decomposition.

A :class:`GraphDataset` is an undirected simple graph over nodes with dense
real features and integer class labels. Datasets start out unsplit; a
stratified train/test split stamps disjoint boolean masks onto the nodes.
:func:`partition_tasks` then groups classes (in ascending label order) into
latent tasks, which downstream modules schedule into streams. Task identity
never reaches a learner; it exists only to define the underlying
distributions.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import substream

log = logging.getLogger(__name__)


class DataError(Exception):
    """Base class for dataset problems (maps to CLI exit code 3)."""


class ParseError(DataError):
    """Malformed input file."""


class ValidationError(DataError):
    """Structurally invalid dataset or partition."""


@dataclass(frozen=True)
class GraphDataset:
    """An undirected node-classification graph, immutable after construction.

    ``train_mask`` and ``test_mask`` are disjoint; a freshly loaded dataset
    has both all-False (unsplit). Edges are deduplicated undirected pairs
    stored as (min, max) with no self loops.
    """

    name: str
    features: np.ndarray        # (node_count, feature_dim) float64
    labels: np.ndarray          # (node_count,) int64 in [0, class_count)
    edges: np.ndarray           # (edge_count, 2) int64, u < v
    class_count: int
    train_mask: np.ndarray      # (node_count,) bool
    test_mask: np.ndarray       # (node_count,) bool

    @property
    def node_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    @property
    def is_split(self) -> bool:
        return bool(self.train_mask.any() or self.test_mask.any())

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.ndim != 2 or self.features.shape[1] < 1:
            raise ValidationError("features must be a (nodes, dim>=1) matrix")
        if self.labels.shape != (n,):
            raise ValidationError("labels must have one entry per node")
        if self.class_count < 1:
            raise ValidationError("class_count must be positive")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValidationError("labels must lie in [0, class_count)")
        missing = np.setdiff1d(np.arange(self.class_count), np.unique(self.labels))
        if missing.size:
            raise ValidationError(f"classes with no nodes: {missing.tolist()}")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= n:
                raise ValidationError("edge endpoint out of range")
            if (self.edges[:, 0] == self.edges[:, 1]).any():
                raise ValidationError("self loops are not allowed after load")
        if self.train_mask.shape != (n,) or self.test_mask.shape != (n,):
            raise ValidationError("masks must have one entry per node")
        if (self.train_mask & self.test_mask).any():
            raise ValidationError("train and test masks overlap")
        if self.is_split:
            for c in range(self.class_count):
                in_c = self.labels == c
                if not (self.train_mask & in_c).any():
                    raise ValidationError(f"class {c} has no train node")
                if not (self.test_mask & in_c).any():
                    raise ValidationError(f"class {c} has no test node")


@dataclass(frozen=True)
class Task:
    """One latent task: a class group and the nodes it owns."""

    class_ids: tuple[int, ...]
    train_nodes: np.ndarray
    test_nodes: np.ndarray

    @property
    def train_count(self) -> int:
        return int(self.train_nodes.size)


@dataclass(frozen=True)
class TaskPartition:
    """Ordered latent tasks covering all classes, plus node ground truth.

    ``node_labels`` is carried so evaluation code can score predictions
    without re-threading the dataset everywhere; it is never exposed to
    learners through the stream.
    """

    tasks: tuple[Task, ...]
    classes_per_task: int
    node_labels: np.ndarray

    @property
    def task_count(self) -> int:
        return len(self.tasks)

    def train_counts(self) -> list[int]:
        return [t.train_count for t in self.tasks]


@dataclass(frozen=True)
class GraphStats:
    homophily: float            # NaN when edge_count == 0
    homophily_defined: bool
    avg_degree: float
    density: float
    node_count: int
    edge_count: int
    class_count: int
    task_count: int


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic class-blob graph (deterministic under seed).

    Features per class are an isotropic unit-variance Gaussian around a
    random unit-norm center scaled by ``class_center_separation``; edges are
    independent Bernoulli draws with intra-/inter-class probabilities. The
    returned dataset is already stratified into train/test.
    """

    classes: int
    nodes_per_class: int
    feature_dim: int
    class_center_separation: float = 5.0
    intra_edge_prob: float = 0.1
    inter_edge_prob: float = 0.01
    seed: int = 0
    test_fraction: float = 0.2
    name: str = "synth"


def _dedupe_edges(raw: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Canonicalize to undirected simple edges; returns (edges, n_dup, n_self)."""
    if raw.size == 0:
        return raw.reshape(0, 2).astype(np.int64), 0, 0
    self_loops = raw[:, 0] == raw[:, 1]
    n_self = int(self_loops.sum())
    kept = raw[~self_loops]
    lo = np.minimum(kept[:, 0], kept[:, 1])
    hi = np.maximum(kept[:, 0], kept[:, 1])
    canon = np.unique(np.stack([lo, hi], axis=1), axis=0)
    n_dup = int(kept.shape[0] - canon.shape[0])
    return canon.astype(np.int64), n_dup, n_self


def load_dataset(path: str | Path, fmt: str = "node-csv+edge-csv", name: str | None = None) -> GraphDataset:
    """Load a dataset directory holding ``nodes.csv`` and ``edges.csv``.

    Node rows are ``id,label,f_0..f_{d-1}`` with ids exactly 0..n-1 in any
    order; edge rows are ``src,dst``. Both files need a header row. Directed
    inputs are symmetrized: duplicates and self loops are dropped with a
    logged count.
    """
    if fmt != "node-csv+edge-csv":
        raise ValidationError(f"unknown dataset format: {fmt}")
    root = Path(path)
    node_path = root / "nodes.csv"
    edge_path = root / "edges.csv"
    for p in (node_path, edge_path):
        if not p.is_file():
            raise DataError(f"missing dataset file: {p}")

    ids: list[int] = []
    labels: list[int] = []
    feats: list[list[float]] = []
    with node_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise ParseError(f"{node_path}:1: expected header starting with 'id'")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ParseError(f"{node_path}:{lineno}: expected {width} fields, got {len(row)}")
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
                feats.append([float(x) for x in row[2:]])
            except ValueError as exc:
                raise ParseError(f"{node_path}:{lineno}: {exc}") from None
    if not ids:
        raise ParseError(f"{node_path}: no node rows")
    n = len(ids)
    order = np.argsort(ids)
    if sorted(ids) != list(range(n)):
        raise ValidationError(f"{node_path}: node ids must be exactly 0..{n - 1}")

    features = np.asarray(feats, dtype=np.float64)[order]
    label_arr = np.asarray(labels, dtype=np.int64)[order]
    if label_arr.min() < 0:
        raise ValidationError(f"{node_path}: negative label")

    raw_edges: list[tuple[int, int]] = []
    with edge_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or [h.strip() for h in header[:2]] != ["src", "dst"]:
            raise ParseError(f"{edge_path}:1: expected header 'src,dst'")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ParseError(f"{edge_path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                u, v = int(row[0]), int(row[1])
            except ValueError as exc:
                raise ParseError(f"{edge_path}:{lineno}: {exc}") from None
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"{edge_path}:{lineno}: edge ({u},{v}) references unknown node")
            raw_edges.append((u, v))

    edges, n_dup, n_self = _dedupe_edges(np.asarray(raw_edges, dtype=np.int64).reshape(-1, 2))
    if n_dup or n_self:
        log.info("%s: dropped %d duplicate and %d self-loop edges", edge_path, n_dup, n_self)

    return GraphDataset(
        name=name or root.name,
        features=features,
        labels=label_arr,
        edges=edges,
        class_count=int(label_arr.max()) + 1,
        train_mask=np.zeros(n, dtype=bool),
        test_mask=np.zeros(n, dtype=bool),
    )


def write_dataset(ds: GraphDataset, path: str | Path) -> None:
    """Write ``nodes.csv`` / ``edges.csv`` so that load(write(ds)) round-trips."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with (root / "nodes.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"f_{j}" for j in range(ds.feature_dim)])
        for i in range(ds.node_count):
            writer.writerow([i, int(ds.labels[i])] + [repr(float(x)) for x in ds.features[i]])
    with (root / "edges.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        for u, v in ds.edges:
            writer.writerow([int(u), int(v)])


def synth_dataset(spec: SynthSpec) -> GraphDataset:
    """Generate a split synthetic dataset per ``spec``; bit-stable under seed."""
    if spec.classes < 1 or spec.feature_dim < 1:
        raise ValidationError("classes and feature_dim must be positive")
    if spec.nodes_per_class < 2:
        raise ValidationError("nodes_per_class must be >= 2 (cannot split train/test)")
    for p in (spec.intra_edge_prob, spec.inter_edge_prob):
        if not 0.0 <= p <= 1.0:
            raise ValidationError("edge probabilities must lie in [0, 1]")

    n = spec.classes * spec.nodes_per_class
    labels = np.repeat(np.arange(spec.classes, dtype=np.int64), spec.nodes_per_class)

    center_rng = substream(spec.seed, "synth-centers")
    centers = center_rng.standard_normal((spec.classes, spec.feature_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers *= spec.class_center_separation

    features = np.empty((n, spec.feature_dim), dtype=np.float64)
    for c in range(spec.classes):
        blob = substream(spec.seed, "synth-blob", c)
        rows = slice(c * spec.nodes_per_class, (c + 1) * spec.nodes_per_class)
        features[rows] = centers[c] + blob.standard_normal((spec.nodes_per_class, spec.feature_dim))

    edge_rng = substream(spec.seed, "synth-edges")
    rows_u = []
    rows_v = []
    for u in range(n - 1):
        m = n - u - 1
        draws = edge_rng.random(m)
        probs = np.where(labels[u + 1:] == labels[u], spec.intra_edge_prob, spec.inter_edge_prob)
        hit = np.nonzero(draws < probs)[0]
        if hit.size:
            rows_u.append(np.full(hit.size, u, dtype=np.int64))
            rows_v.append(hit + u + 1)
    if rows_u:
        edges = np.stack([np.concatenate(rows_u), np.concatenate(rows_v)], axis=1)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)

    ds = GraphDataset(
        name=spec.name,
        features=features,
        labels=labels,
        edges=edges,
        class_count=spec.classes,
        train_mask=np.zeros(n, dtype=bool),
        test_mask=np.zeros(n, dtype=bool),
    )
    return split_train_test(ds, spec.test_fraction, spec.seed)


def split_train_test(ds: GraphDataset, test_fraction: float, seed: int) -> GraphDataset:
    """Stratified split: per class, round-half-up test count clamped to [1, size-1]."""
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must lie strictly between 0 and 1")
    train = np.zeros(ds.node_count, dtype=bool)
    test = np.zeros(ds.node_count, dtype=bool)
    for c in range(ds.class_count):
        members = np.nonzero(ds.labels == c)[0]
        if members.size < 2:
            raise ValidationError(f"class {c} has {members.size} node(s); need >= 2 to split")
        n_test = int(np.floor(test_fraction * members.size + 0.5))
        n_test = max(1, min(members.size - 1, n_test))
        perm = substream(seed, "split", c).permutation(members.size)
        test[members[perm[:n_test]]] = True
        train[members[perm[n_test:]]] = True
    return GraphDataset(
        name=ds.name,
        features=ds.features,
        labels=ds.labels,
        edges=ds.edges,
        class_count=ds.class_count,
        train_mask=train,
        test_mask=test,
    )


def partition_tasks(ds: GraphDataset, classes_per_task: int = 2) -> TaskPartition:
    """Group classes into latent tasks in ascending label order.

    K = ceil(C / classes_per_task); when the group size does not divide C the
    final task absorbs the remainder classes rather than dropping them.
    """
    if classes_per_task <= 0 or classes_per_task > ds.class_count:
        raise ValidationError(
            f"classes_per_task must lie in [1, {ds.class_count}], got {classes_per_task}")
    if not ds.is_split:
        raise ValidationError("dataset must be split before task partitioning")

    tasks = []
    for start in range(0, ds.class_count, classes_per_task):
        class_ids = tuple(range(start, min(start + classes_per_task, ds.class_count)))
        in_task = np.isin(ds.labels, class_ids)
        tasks.append(Task(
            class_ids=class_ids,
            train_nodes=np.nonzero(in_task & ds.train_mask)[0].astype(np.int64),
            test_nodes=np.nonzero(in_task & ds.test_mask)[0].astype(np.int64),
        ))
    return TaskPartition(
        tasks=tuple(tasks),
        classes_per_task=classes_per_task,
        node_labels=ds.labels.copy(),
    )


def graph_stats(ds: GraphDataset, partition: TaskPartition) -> GraphStats:
    """Structural statistics of a dataset under a task partition."""
    n, e = ds.node_count, ds.edge_count
    if e:
        same = int((ds.labels[ds.edges[:, 0]] == ds.labels[ds.edges[:, 1]]).sum())
        h, defined = same / e, True
    else:
        h, defined = float("nan"), False
    return GraphStats(
        homophily=h,
        homophily_defined=defined,
        avg_degree=2.0 * e / n if n else 0.0,
        density=2.0 * e / (n * (n - 1)) if n > 1 else 0.0,
        node_count=n,
        edge_count=e,
        class_count=ds.class_count,
        task_count=partition.task_count,
    )
