"""Materialize mixture schedules into concrete ordered mini-batch streams.

All four transition protocols produce a :class:`Stream`: an ordered list of
batches whose items carry a hidden origin-task annotation (used only by
evaluation and analysis code, never shown to learners). Randomness flows
exclusively through named substreams of the stream seed, so identical inputs
reproduce byte-identical streams and new draw purposes cannot perturb old
ones.

Batch sizing: hard-schedule windows emit ceil(N_k/B) batches, the last of
which may be short (no padding, no cross-task fill). Gaussian-mode batches
always hold exactly B items; per-task queues reshuffle on exhaustion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import TaskPartition, GraphDataset
from .rng import substream
from .schedule import ScheduleConfig, TransitionSchedule

FORMAT_VERSION = 1


class SamplerError(ValueError):
    """Invalid sampling request or configuration."""


@dataclass(frozen=True)
class StreamBatch:
    index: int
    items: tuple[tuple[int, int], ...]  # (node_index, origin_task)


@dataclass(frozen=True)
class StreamProvenance:
    dataset: str
    mode: str
    batch_size: int
    sampling: str
    seed: int
    task_count: int
    sigma: float | None = None
    mix_fraction: float | None = None
    window_batches: int | None = None
    format_version: int = FORMAT_VERSION


@dataclass(frozen=True)
class Stream:
    batches: tuple[StreamBatch, ...]
    provenance: StreamProvenance

    @property
    def length(self) -> int:
        return len(self.batches)

    def item_count(self) -> int:
        return sum(len(b.items) for b in self.batches)


def allocate_counts(weights: np.ndarray, batch_size: int) -> np.ndarray:
    """Apportion a batch across tasks by largest-remainder rounding.

    Floors of alpha_k * B, then one extra unit to the largest fractional
    remainders until the batch is full; remainder ties break toward the
    lower task index.
    """
    if batch_size < 1:
        raise SamplerError("batch_size must be >= 1")
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise SamplerError("weights must be a nonempty vector")
    if w.min() < 0.0 or abs(w.sum() - 1.0) > 1e-9:
        raise SamplerError("weights must lie on the probability simplex")
    scaled = w * batch_size
    counts = np.floor(scaled).astype(np.int64)
    deficit = batch_size - int(counts.sum())
    assert 0 <= deficit <= w.size
    if deficit:
        order = np.argsort(-(scaled - counts), kind="stable")
        counts[order[:deficit]] += 1
    return counts


class SamplerState:
    """Per-task draw state for one stream.

    Without-replacement mode keeps a shuffled queue per task and a cursor;
    exhausting a queue mid-draw reshuffles it with a fresh substream keyed by
    (task, epoch). With-replacement mode draws independently per (task, step).
    """

    def __init__(self, partition: TaskPartition, seed: int, sampling: str = "without"):
        if sampling not in ("without", "with"):
            raise SamplerError(f"sampling must be 'without' or 'with', got {sampling!r}")
        self.sampling = sampling
        self.seed = seed
        self.step = 0
        self._train = [np.asarray(t.train_nodes, dtype=np.int64) for t in partition.tasks]
        self._queues = [
            nodes[substream(seed, "queue", k, 0).permutation(nodes.size)]
            for k, nodes in enumerate(self._train)
        ]
        self._cursors = [0] * len(self._train)
        self._epochs = [0] * len(self._train)

    @property
    def task_count(self) -> int:
        return len(self._train)

    def _draw_without(self, k: int, n: int) -> list[int]:
        out: list[int] = []
        while len(out) < n:
            take = min(n - len(out), self._queues[k].size - self._cursors[k])
            out.extend(self._queues[k][self._cursors[k]:self._cursors[k] + take].tolist())
            self._cursors[k] += take
            if self._cursors[k] == self._queues[k].size and len(out) < n:
                self._epochs[k] += 1
                perm = substream(self.seed, "queue", k, self._epochs[k]).permutation(
                    self._train[k].size)
                self._queues[k] = self._train[k][perm]
                self._cursors[k] = 0
        return out

    def _draw_with(self, k: int, n: int) -> list[int]:
        rng = substream(self.seed, "draw", k, self.step)
        return self._train[k][rng.integers(0, self._train[k].size, size=n)].tolist()

    def next_batch(self, counts: np.ndarray) -> StreamBatch:
        counts = np.asarray(counts, dtype=np.int64)
        if counts.size != self.task_count or counts.min() < 0:
            raise SamplerError("counts must be a nonnegative vector over all tasks")
        items: list[tuple[int, int]] = []
        for k in range(self.task_count):
            n = int(counts[k])
            if n == 0:
                continue
            if self._train[k].size == 0:
                raise SamplerError(f"task {k} has no train nodes but was asked for {n} items")
            draw = self._draw_without(k, n) if self.sampling == "without" else self._draw_with(k, n)
            items.extend((node, k) for node in draw)
        perm = substream(self.seed, "shuffle", self.step).permutation(len(items))
        batch = StreamBatch(index=self.step, items=tuple(items[i] for i in perm))
        self.step += 1
        return batch


def next_batch_without_replacement(state: SamplerState, counts: np.ndarray) -> StreamBatch:
    if state.sampling != "without":
        raise SamplerError("state was built for with-replacement sampling")
    return state.next_batch(counts)


def next_batch_with_replacement(state: SamplerState, counts: np.ndarray) -> StreamBatch:
    if state.sampling != "with":
        raise SamplerError("state was built for without-replacement sampling")
    return state.next_batch(counts)


def _hard_batch_sizes(train_counts: list[int], batch_size: int) -> tuple[list[int], list[int]]:
    """Per-step (owner task, item count) for the hard reference schedule."""
    owners: list[int] = []
    sizes: list[int] = []
    for k, n in enumerate(train_counts):
        full, tail = divmod(n, batch_size)
        owners.extend([k] * (full + (1 if tail else 0)))
        sizes.extend([batch_size] * full + ([tail] if tail else []))
    return owners, sizes


def build_stream(
    ds: GraphDataset,
    partition: TaskPartition,
    schedule: TransitionSchedule,
    sampling: str,
    seed: int,
) -> Stream:
    """Draw the full stream for a hard or gaussian schedule."""
    mode = schedule.config.mode
    if mode not in ("hard", "gaussian"):
        raise SamplerError(
            f"build_stream handles hard/gaussian schedules; use the dedicated "
            f"builder for {mode!r}")
    B = schedule.config.batch_size
    state = SamplerState(partition, seed, sampling)
    batches = []
    if mode == "hard":
        owners, sizes = _hard_batch_sizes(partition.train_counts(), B)
        for k, size in zip(owners, sizes):
            counts = np.zeros(partition.task_count, dtype=np.int64)
            counts[k] = size
            batches.append(state.next_batch(counts))
    else:
        for t in range(schedule.stream_length):
            batches.append(state.next_batch(allocate_counts(schedule.weights[t], B)))
    return Stream(
        batches=tuple(batches),
        provenance=StreamProvenance(
            dataset=ds.name,
            mode=mode,
            batch_size=B,
            sampling=sampling,
            seed=seed,
            task_count=partition.task_count,
            sigma=schedule.config.sigma,
        ),
    )


def _hard_item_sequence(partition: TaskPartition, seed: int) -> tuple[list[int], list[int], list[int]]:
    """Queue-shuffled items laid out in task order; returns (nodes, origins, segment starts)."""
    nodes: list[int] = []
    origins: list[int] = []
    starts: list[int] = []
    for k, task in enumerate(partition.tasks):
        starts.append(len(nodes))
        train = np.asarray(task.train_nodes, dtype=np.int64)
        perm = substream(seed, "queue", k, 0).permutation(train.size)
        nodes.extend(train[perm].tolist())
        origins.extend([k] * train.size)
    return nodes, origins, starts


def _chunk_and_shuffle(
    nodes: list[int], origins: list[int], sizes: list[int], seed: int
) -> tuple[StreamBatch, ...]:
    batches = []
    pos = 0
    for t, size in enumerate(sizes):
        chunk = list(zip(nodes[pos:pos + size], origins[pos:pos + size]))
        pos += size
        perm = substream(seed, "shuffle", t).permutation(size)
        batches.append(StreamBatch(index=t, items=tuple(chunk[i] for i in perm)))
    return tuple(batches)


def reserve_pool_sizes(partition: TaskPartition, mix_fraction: float) -> list[int]:
    """Round-half-up share of each task's train nodes reserved for global mixing."""
    if not 0.0 <= mix_fraction <= 1.0:
        raise SamplerError("mix_fraction must lie in [0, 1]")
    return [int(np.floor(mix_fraction * n + 0.5)) for n in partition.train_counts()]


def build_global_mix_stream(
    ds: GraphDataset,
    partition: TaskPartition,
    batch_size: int,
    mix_fraction: float,
    seed: int,
) -> Stream:
    """Hard schedule with a fixed fraction of every task spread over the stream.

    round(p * N_k) nodes per task go into a shared pool; the pool lands on
    uniformly chosen item slots across the whole stream while the remaining
    nodes keep the hard order, so every batch keeps its hard-schedule size.
    With p = 0 this reduces exactly to the hard stream.
    """
    sizes_per_task = reserve_pool_sizes(partition, mix_fraction)
    nodes, origins, starts = _hard_item_sequence(partition, seed)
    total = len(nodes)

    pool: list[tuple[int, int]] = []
    keep_nodes: list[int] = []
    keep_origins: list[int] = []
    for k, task in enumerate(partition.tasks):
        seg_lo = starts[k]
        seg_hi = seg_lo + task.train_count
        r = sizes_per_task[k]
        if r:
            picks = substream(seed, "gmix-reserve", k).choice(task.train_count, size=r, replace=False)
            reserved = np.zeros(task.train_count, dtype=bool)
            reserved[picks] = True
        else:
            reserved = np.zeros(task.train_count, dtype=bool)
        for offset in range(task.train_count):
            node = nodes[seg_lo + offset]
            if reserved[offset]:
                pool.append((node, k))
            else:
                keep_nodes.append(node)
                keep_origins.append(k)
        assert seg_hi <= total

    if pool:
        pool_perm = substream(seed, "gmix-pool").permutation(len(pool))
        pool = [pool[i] for i in pool_perm]
        slots = np.sort(substream(seed, "gmix-slots").choice(total, size=len(pool), replace=False))
    else:
        slots = np.zeros(0, dtype=np.int64)

    out_nodes = [0] * total
    out_origins = [0] * total
    is_pool_slot = np.zeros(total, dtype=bool)
    is_pool_slot[slots] = True
    pool_i = 0
    keep_i = 0
    for pos in range(total):
        if is_pool_slot[pos]:
            out_nodes[pos], out_origins[pos] = pool[pool_i]
            pool_i += 1
        else:
            out_nodes[pos] = keep_nodes[keep_i]
            out_origins[pos] = keep_origins[keep_i]
            keep_i += 1

    _, sizes = _hard_batch_sizes(partition.train_counts(), batch_size)
    return Stream(
        batches=_chunk_and_shuffle(out_nodes, out_origins, sizes, seed),
        provenance=StreamProvenance(
            dataset=ds.name,
            mode="global_mix",
            batch_size=batch_size,
            sampling="without",
            seed=seed,
            task_count=partition.task_count,
            mix_fraction=mix_fraction,
        ),
    )


def build_boundary_local_stream(
    ds: GraphDataset,
    partition: TaskPartition,
    batch_size: int,
    window_batches: int,
    seed: int,
) -> Stream:
    """Hard schedule with pooling at each task boundary.

    At boundary k|k+1 the last window_batches*B items of task k and the first
    window_batches*B items of task k+1 are pooled and redistributed uniformly
    over the item slots they occupied; everything else stays task-pure.
    """
    if window_batches < 0:
        raise SamplerError("window_batches must be >= 0")
    w = window_batches * batch_size
    counts = partition.train_counts()
    if w:
        for j in range(partition.task_count - 1):
            if 2 * w > counts[j] or 2 * w > counts[j + 1]:
                raise SamplerError(
                    f"boundary {j}|{j + 1}: window of {w} items needs at most "
                    f"half of each task's train nodes "
                    f"(N_{j}={counts[j]}, N_{j + 1}={counts[j + 1]})")

    nodes, origins, starts = _hard_item_sequence(partition, seed)
    if w:
        for j in range(partition.task_count - 1):
            boundary = starts[j + 1]
            lo, hi = boundary - w, boundary + w
            pooled = list(zip(nodes[lo:hi], origins[lo:hi]))
            perm = substream(seed, "boundary", j).permutation(len(pooled))
            for offset, i in enumerate(perm):
                nodes[lo + offset], origins[lo + offset] = pooled[i]

    _, sizes = _hard_batch_sizes(counts, batch_size)
    return Stream(
        batches=_chunk_and_shuffle(nodes, origins, sizes, seed),
        provenance=StreamProvenance(
            dataset=ds.name,
            mode="boundary_local",
            batch_size=batch_size,
            sampling="without",
            seed=seed,
            task_count=partition.task_count,
            window_batches=window_batches,
        ),
    )
