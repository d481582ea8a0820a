"""Transition schedules: task centers, mixture weights, overlap index.

The stream is indexed by zero-based batch steps t = 0..T-1. Each latent task
k owns a contiguous reference window of B_k = ceil(N_k / B) steps; its center
mu_k = sum_{i<k} B_i + B_k / 2 sits at the window midpoint in continuous
time. Gaussian schedules evaluate the kernel at the batch midpoint t + 1/2,
which keeps every step strictly nearest its own window's center on
equal-size windows; at integer step positions the first step of each window
would be exactly equidistant between two centers and the sigma -> 0 limit
would split 50/50 instead of recovering the hard schedule.

Modes ``global_mix`` and ``boundary_local`` mix concrete sample pools rather
than weights, so their schedules carry configuration plus the hard reference
windows and no weight matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import TaskPartition

MODES = ("hard", "gaussian", "global_mix", "boundary_local")
DEFAULT_DOMINANCE_THRESHOLD = 0.95

SIMPLEX_TOL = 1e-12


class ScheduleError(ValueError):
    """Invalid schedule configuration or query."""


@dataclass(frozen=True)
class ScheduleConfig:
    mode: str
    batch_size: int = 10
    sigma: float | None = None          # gaussian only
    mix_fraction: float | None = None   # global_mix only
    window_batches: int | None = None   # boundary_local only
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScheduleError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.batch_size < 1:
            raise ScheduleError("batch_size must be >= 1")
        wants = {
            "hard": (),
            "gaussian": ("sigma",),
            "global_mix": ("mix_fraction",),
            "boundary_local": ("window_batches",),
        }[self.mode]
        for name in ("sigma", "mix_fraction", "window_batches"):
            value = getattr(self, name)
            if name in wants and value is None:
                raise ScheduleError(f"mode {self.mode!r} requires {name}")
            if name not in wants and value is not None:
                raise ScheduleError(f"{name} is not a parameter of mode {self.mode!r}")
        if self.sigma is not None and self.sigma <= 0:
            raise ScheduleError("sigma must be positive")
        if self.mix_fraction is not None and not 0.0 <= self.mix_fraction <= 1.0:
            raise ScheduleError("mix_fraction must lie in [0, 1]")
        if self.window_batches is not None and self.window_batches < 0:
            raise ScheduleError("window_batches must be >= 0")


@dataclass(frozen=True)
class TransitionSchedule:
    """Per-step mixture weights (explicit modes) plus generating config.

    ``weights`` is a (T, K) row-simplex matrix for hard/gaussian modes and
    None for the pool-mixing modes, which only need the hard reference
    geometry (``task_batches``, ``centers``).
    """

    centers: np.ndarray         # (K,) task centers in batch units
    task_batches: np.ndarray    # (K,) B_k = ceil(N_k / B)
    stream_length: int
    weights: np.ndarray | None
    config: ScheduleConfig

    @property
    def task_count(self) -> int:
        return self.centers.size

    def window_starts(self) -> np.ndarray:
        """Start step of each task's hard reference window."""
        return np.concatenate([[0], np.cumsum(self.task_batches)[:-1]])


def task_centers(partition: TaskPartition, batch_size: int) -> np.ndarray:
    """Window midpoints mu_k = sum_{i<k} B_i + B_k/2, zero-based batch units."""
    if batch_size < 1:
        raise ScheduleError("batch_size must be >= 1")
    if partition.task_count == 0:
        raise ScheduleError("partition has no tasks")
    counts = np.asarray(partition.train_counts(), dtype=np.int64)
    if (counts == 0).any():
        empty = int(np.nonzero(counts == 0)[0][0])
        raise ScheduleError(f"task {empty} has no train nodes")
    per_task = np.ceil(counts / batch_size).astype(np.int64)
    starts = np.concatenate([[0], np.cumsum(per_task)[:-1]])
    return starts + per_task / 2.0


def _task_batch_counts(partition: TaskPartition, batch_size: int) -> np.ndarray:
    counts = np.asarray(partition.train_counts(), dtype=np.int64)
    return np.ceil(counts / batch_size).astype(np.int64)


def gaussian_weights(t: float, centers: np.ndarray, sigma: float) -> np.ndarray:
    """Normalized Gaussian kernels over task centers at time t.

    Max-subtraction keeps the exponentials in range; kernels more than ~38
    sigmas from t underflow to exactly zero, which is the intended limit
    behavior rather than an error.
    """
    if sigma <= 0:
        raise ScheduleError("sigma must be positive")
    centers = np.asarray(centers, dtype=np.float64)
    if centers.size == 0:
        raise ScheduleError("centers must be nonempty")
    z = -0.5 * ((t - centers) / sigma) ** 2
    z -= z.max()
    w = np.exp(z)
    return w / w.sum()


def hard_weights(t: int, partition: TaskPartition, batch_size: int) -> np.ndarray:
    """One-hot weights of the task whose contiguous window contains step t."""
    per_task = _task_batch_counts(partition, batch_size)
    total = int(per_task.sum())
    if not 0 <= t < total:
        raise ScheduleError(f"step {t} outside stream of length {total}")
    k = int(np.searchsorted(np.cumsum(per_task), t, side="right"))
    out = np.zeros(partition.task_count, dtype=np.float64)
    out[k] = 1.0
    return out


def build_schedule(partition: TaskPartition, config: ScheduleConfig) -> TransitionSchedule:
    """Materialize per-step weights (hard/gaussian) or a pool-mode sentinel."""
    centers = task_centers(partition, config.batch_size)
    per_task = _task_batch_counts(partition, config.batch_size)
    total = int(per_task.sum())

    weights = None
    if config.mode == "hard":
        weights = np.zeros((total, partition.task_count), dtype=np.float64)
        owner = np.repeat(np.arange(partition.task_count), per_task)
        weights[np.arange(total), owner] = 1.0
    elif config.mode == "gaussian":
        # kernel evaluated at batch midpoints; see module docstring
        steps = np.arange(total, dtype=np.float64) + 0.5
        z = -0.5 * ((steps[:, None] - centers[None, :]) / config.sigma) ** 2
        z -= z.max(axis=1, keepdims=True)
        weights = np.exp(z)
        weights /= weights.sum(axis=1, keepdims=True)

    return TransitionSchedule(
        centers=centers,
        task_batches=per_task,
        stream_length=total,
        weights=weights,
        config=config,
    )


def overlap_index(schedule: TransitionSchedule, tau: float = DEFAULT_DOMINANCE_THRESHOLD) -> float:
    """Fraction of steps where no task's weight reaches the threshold tau."""
    if not 0.0 < tau <= 1.0:
        raise ScheduleError("tau must lie in (0, 1]")
    if schedule.weights is None:
        raise ScheduleError(
            f"mode {schedule.config.mode!r} has no explicit weights; overlap index undefined")
    return float((schedule.weights.max(axis=1) < tau).mean())


def export_mixing_curve(schedule: TransitionSchedule, path: str | Path) -> None:
    """Write the weight matrix as CSV rows (t, alpha_0..alpha_{K-1})."""
    if schedule.weights is None:
        raise ScheduleError(
            f"mode {schedule.config.mode!r} has no explicit weights; nothing to export")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"alpha_{k}" for k in range(schedule.task_count)])
        for t in range(schedule.stream_length):
            writer.writerow([t] + [f"{w:.9g}" for w in schedule.weights[t]])
