"""Reference online learners over node streams.

The model is a multinomial linear classifier over optionally pre-propagated
features (row-mean aggregation over closed neighborhoods, applied a fixed
number of hops up front). Weights start at zero so deterministic tests see
no initializer variance; the model is convex, so nothing is lost.

Learners see a :class:`LearnerBatch` only: node ids, labels, feature rows.
Origin-task annotations stop at :func:`learner_view`.

Four behaviors:

* bare     - one cross-entropy pass per incoming batch, nothing else
* er       - replay from a reservoir-sampled memory at a 1:1 ratio
* agem     - project the incoming gradient when it conflicts with the
             memory gradient
* joint    - offline multi-epoch training on the full train set
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import GraphDataset, TaskPartition
from .rng import substream
from .sampler import StreamBatch

LEARNER_KINDS = ("bare", "er", "agem")


class NumericError(ArithmeticError):
    """Non-finite loss or gradient (maps to CLI exit code 4)."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-3
    epochs_per_batch: int = 1       # fixed single pass per incoming batch
    replay_ratio: int = 1           # replay items per incoming item
    optimizer: str = "sgd"          # "sgd" or "adam"
    hops: int = 1
    buffer_capacity: int = 100
    joint_epochs: int = 25
    joint_batch_size: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.epochs_per_batch != 1:
            raise ValueError("online learners make exactly one pass per batch")
        if self.replay_ratio < 0:
            raise ValueError("replay_ratio must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.hops not in (0, 1, 2):
            raise ValueError("hops must be 0, 1, or 2")


@dataclass(frozen=True)
class PropagatedFeatures:
    matrix: np.ndarray
    hops: int


def propagate_features(ds: GraphDataset, hops: int) -> PropagatedFeatures:
    """Average features over the closed neighborhood, ``hops`` times."""
    if hops not in (0, 1, 2):
        raise ValueError("hops must be 0, 1, or 2")
    x = ds.features.astype(np.float64)
    if hops and ds.edge_count:
        deg = np.zeros(ds.node_count, dtype=np.float64)
        np.add.at(deg, ds.edges[:, 0], 1.0)
        np.add.at(deg, ds.edges[:, 1], 1.0)
        denom = (deg + 1.0)[:, None]
        for _ in range(hops):
            agg = x.copy()
            np.add.at(agg, ds.edges[:, 0], x[ds.edges[:, 1]])
            np.add.at(agg, ds.edges[:, 1], x[ds.edges[:, 0]])
            x = agg / denom
    return PropagatedFeatures(matrix=x, hops=hops)


class LinearModel:
    """C-way linear classifier; single-writer mutable state."""

    def __init__(self, class_count: int, feature_dim: int):
        self.class_count = class_count
        self.feature_dim = feature_dim
        self.weights = np.zeros((class_count, feature_dim), dtype=np.float64)
        self.bias = np.zeros(class_count, dtype=np.float64)
        self._adam: dict | None = None

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.bias


def predict(model: LinearModel, features: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Argmax class per node; ties resolve to the lowest class id."""
    return np.argmax(model.logits(features[np.asarray(nodes, dtype=np.int64)]), axis=1)


def loss_and_grad(model: LinearModel, x: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy and its gradient in (weights, bias)."""
    n = x.shape[0]
    z = model.logits(x)
    if not np.isfinite(z).all():
        raise NumericError("non-finite logits")
    z -= z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean()
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss: {loss}")
    g = np.exp(logp)
    g[np.arange(n), y] -= 1.0
    g /= n
    return float(loss), g.T @ x, g.sum(axis=0)


def _apply_gradient(model: LinearModel, g_w: np.ndarray, g_b: np.ndarray, config: TrainConfig):
    lr = config.learning_rate
    if config.optimizer == "sgd":
        model.weights -= lr * g_w
        model.bias -= lr * g_b
        return
    if model._adam is None:
        model._adam = {
            "step": 0,
            "m_w": np.zeros_like(model.weights), "v_w": np.zeros_like(model.weights),
            "m_b": np.zeros_like(model.bias), "v_b": np.zeros_like(model.bias),
        }
    s = model._adam
    b1, b2, eps = 0.9, 0.999, 1e-8
    s["step"] += 1
    t = s["step"]
    for key, grad, param in (("w", g_w, model.weights), ("b", g_b, model.bias)):
        s[f"m_{key}"] = b1 * s[f"m_{key}"] + (1 - b1) * grad
        s[f"v_{key}"] = b2 * s[f"v_{key}"] + (1 - b2) * grad * grad
        m_hat = s[f"m_{key}"] / (1 - b1 ** t)
        v_hat = s[f"v_{key}"] / (1 - b2 ** t)
        param -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass(frozen=True)
class LearnerBatch:
    """What a learner is allowed to see: nodes, labels, features. No origin."""

    nodes: np.ndarray
    labels: np.ndarray
    features: np.ndarray


def learner_view(batch: StreamBatch, features: np.ndarray, labels: np.ndarray) -> LearnerBatch:
    """Strip origin-task annotations from a stream batch."""
    nodes = np.asarray([node for node, _ in batch.items], dtype=np.int64)
    return LearnerBatch(nodes=nodes, labels=labels[nodes], features=features[nodes])


class ReservoirBuffer:
    """Fixed-capacity uniform sample of an unbounded stream of (node, label)."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.seen = 0
        self.items: list[tuple[int, int]] = []
        self._rng = rng

    def __len__(self) -> int:
        return len(self.items)

    def offer(self, node: int, label: int) -> None:
        self.seen += 1
        if len(self.items) < self.capacity:
            self.items.append((node, label))
        else:
            j = int(self._rng.integers(0, self.seen))
            if j < self.capacity:
                self.items[j] = (node, label)

    def offer_batch(self, batch: LearnerBatch) -> None:
        for node, label in zip(batch.nodes.tolist(), batch.labels.tolist()):
            self.offer(node, label)

    def sample(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Uniform draw: without replacement when the buffer is large enough."""
        if not self.items or count <= 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        replace = len(self.items) < count
        idx = rng.choice(len(self.items), size=count, replace=replace)
        arr = np.asarray(self.items, dtype=np.int64)[idx]
        return arr[:, 0], arr[:, 1]


def observe_bare(model: LinearModel, batch: LearnerBatch, config: TrainConfig) -> LinearModel:
    """One cross-entropy pass over the incoming batch."""
    if batch.nodes.size == 0:
        raise ValueError("batch must be nonempty")
    _, g_w, g_b = loss_and_grad(model, batch.features, batch.labels)
    _apply_gradient(model, g_w, g_b, config)
    return model


def observe_er(
    model: LinearModel,
    batch: LearnerBatch,
    buffer: ReservoirBuffer,
    config: TrainConfig,
    features: np.ndarray,
    rng: np.random.Generator,
) -> LinearModel:
    """Train on incoming plus an equal-count replay draw, then update memory."""
    if batch.nodes.size == 0:
        raise ValueError("batch must be nonempty")
    r_nodes, r_labels = buffer.sample(config.replay_ratio * batch.nodes.size, rng)
    if r_nodes.size:
        x = np.concatenate([batch.features, features[r_nodes]])
        y = np.concatenate([batch.labels, r_labels])
    else:
        x, y = batch.features, batch.labels
    _, g_w, g_b = loss_and_grad(model, x, y)
    _apply_gradient(model, g_w, g_b, config)
    buffer.offer_batch(batch)
    return model


def agem_project(grad: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Remove a conflicting reference component from ``grad``.

    When grad . ref < 0, returns grad - (grad.ref/||ref||^2) ref, which is
    orthogonal to ref; otherwise (including ||ref|| = 0) grad is unchanged.
    """
    dot = float(grad @ ref)
    ref_sq = float(ref @ ref)
    if dot < 0.0 and ref_sq > 0.0:
        return grad - (dot / ref_sq) * ref
    return grad


def observe_agem(
    model: LinearModel,
    batch: LearnerBatch,
    buffer: ReservoirBuffer,
    config: TrainConfig,
    features: np.ndarray,
    rng: np.random.Generator,
) -> LinearModel:
    """Gradient step with the incoming gradient projected off a conflicting
    memory gradient; the memory gradient is taken over the full buffer."""
    if batch.nodes.size == 0:
        raise ValueError("batch must be nonempty")
    _, g_w, g_b = loss_and_grad(model, batch.features, batch.labels)
    if len(buffer):
        arr = np.asarray(buffer.items, dtype=np.int64)
        _, r_w, r_b = loss_and_grad(model, features[arr[:, 0]], arr[:, 1])
        flat = agem_project(np.concatenate([g_w.ravel(), g_b]),
                            np.concatenate([r_w.ravel(), r_b]))
        g_w = flat[:g_w.size].reshape(g_w.shape)
        g_b = flat[g_w.size:]
    _apply_gradient(model, g_w, g_b, config)
    buffer.offer_batch(batch)
    return model


def train_joint(
    ds: GraphDataset,
    partition: TaskPartition,
    config: TrainConfig,
    features: PropagatedFeatures | None = None,
) -> LinearModel:
    """Offline upper bound: shuffled mini-batch epochs over all train nodes."""
    if features is None:
        features = propagate_features(ds, config.hops)
    model = LinearModel(ds.class_count, features.matrix.shape[1])
    train_nodes = np.nonzero(ds.train_mask)[0]
    for epoch in range(config.joint_epochs):
        order = substream(config.seed, "joint-epoch", epoch).permutation(train_nodes.size)
        shuffled = train_nodes[order]
        for lo in range(0, shuffled.size, config.joint_batch_size):
            nodes = shuffled[lo:lo + config.joint_batch_size]
            _, g_w, g_b = loss_and_grad(model, features.matrix[nodes], ds.labels[nodes])
            _apply_gradient(model, g_w, g_b, config)
    return model


def save_checkpoint(model: LinearModel, path: str | Path) -> None:
    """Header plus row-major decimal weights; loads back bit-exact."""
    header = json.dumps(
        {"bias": True, "class_count": model.class_count, "feature_dim": model.feature_dim},
        sort_keys=True, separators=(",", ":"))
    rows = [" ".join(repr(float(v)) for v in row) for row in model.weights]
    rows.append(" ".join(repr(float(v)) for v in model.bias))
    Path(path).write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> LinearModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    model = LinearModel(header["class_count"], header["feature_dim"])
    body = [np.asarray([float(v) for v in line.split()]) for line in lines[1:] if line]
    if len(body) != model.class_count + 1:
        raise ValueError(f"{path}: expected {model.class_count + 1} rows, got {len(body)}")
    model.weights = np.stack(body[:-1])
    model.bias = body[-1]
    return model


class OnlineLearner:
    """Stream-facing wrapper holding model, memory, and draw state."""

    def __init__(self, kind: str, class_count: int, feature_dim: int,
                 config: TrainConfig, features: np.ndarray, seed: int):
        if kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner {kind!r}; expected one of {LEARNER_KINDS}")
        self.kind = kind
        self.config = config
        self.model = LinearModel(class_count, feature_dim)
        self.features = features
        self.buffer = None
        if kind in ("er", "agem"):
            self.buffer = ReservoirBuffer(config.buffer_capacity, substream(seed, "reservoir"))
        self._replay_rng = substream(seed, "replay")

    def observe(self, batch: LearnerBatch) -> None:
        if self.kind == "bare":
            observe_bare(self.model, batch, self.config)
        elif self.kind == "er":
            observe_er(self.model, batch, self.buffer, self.config, self.features,
                       self._replay_rng)
        else:
            observe_agem(self.model, batch, self.buffer, self.config, self.features,
                         self._replay_rng)

    def predict_nodes(self, features: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        return predict(self.model, features, nodes)
