import numpy as np
import pytest

from mixstream.graphs import SynthSpec, Task, TaskPartition, partition_tasks, synth_dataset


@pytest.fixture(scope="session")
def small_ds():
    """10 classes x 25 nodes, split; 5 tasks of 40 train nodes each (B|N_k)."""
    return synth_dataset(SynthSpec(
        classes=10, nodes_per_class=25, feature_dim=16,
        class_center_separation=5.0, intra_edge_prob=0.1, inter_edge_prob=0.005,
        seed=7, test_fraction=0.2, name="small"))


@pytest.fixture(scope="session")
def small_partition(small_ds):
    return partition_tasks(small_ds, 2)


def fake_partition(train_counts, test_per_task=1):
    """A partition skeleton with the given per-task train-node counts.

    Node indices are globally distinct; labels: 2 classes per task, nodes of
    task k all labeled 2k (good enough for schedule/sampler geometry tests).
    """
    tasks = []
    labels = []
    cursor = 0
    for k, n in enumerate(train_counts):
        train = np.arange(cursor, cursor + n, dtype=np.int64)
        cursor += n
        test = np.arange(cursor, cursor + test_per_task, dtype=np.int64)
        cursor += test_per_task
        tasks.append(Task(class_ids=(2 * k, 2 * k + 1), train_nodes=train, test_nodes=test))
        labels.extend([2 * k] * (n + test_per_task))
    return TaskPartition(tasks=tuple(tasks), classes_per_task=2,
                         node_labels=np.asarray(labels, dtype=np.int64))
