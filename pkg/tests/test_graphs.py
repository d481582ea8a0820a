import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixstream.graphs import (
    DataError,
    GraphDataset,
    ParseError,
    SynthSpec,
    ValidationError,
    graph_stats,
    load_dataset,
    partition_tasks,
    split_train_test,
    synth_dataset,
    write_dataset,
)


def write_csvs(tmp_path, node_rows, edge_rows):
    (tmp_path / "nodes.csv").write_text("\n".join(node_rows) + "\n")
    (tmp_path / "edges.csv").write_text("\n".join(edge_rows) + "\n")
    return tmp_path


def test_load_minimal(tmp_path):
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1.5", "1,0,2.0", "2,1,-1.0"],
               ["src,dst", "0,1", "1,2"])
    ds = load_dataset(tmp_path)
    assert ds.node_count == 3
    assert ds.class_count == 2
    assert ds.edge_count == 2
    assert ds.features[0, 0] == 1.5
    assert not ds.is_split


def test_load_dangling_edge(tmp_path):
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1", "1,0,1", "2,1,1"],
               ["src,dst", "0,3"])
    with pytest.raises(ValidationError):
        load_dataset(tmp_path)


def test_load_malformed_row_reports_line(tmp_path):
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1", "1,zero,1", "2,1,1"],
               ["src,dst"])
    with pytest.raises(ParseError, match="nodes.csv:3"):
        load_dataset(tmp_path)


def test_load_missing_class(tmp_path):
    # labels 0 and 2 leave class 1 empty
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1", "1,2,1"],
               ["src,dst"])
    with pytest.raises(ValidationError, match="class"):
        load_dataset(tmp_path)


def test_load_dedupes_and_symmetrizes(tmp_path):
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1", "1,0,1", "2,1,1"],
               ["src,dst", "0,1", "1,0", "1,1", "0,2"])
    ds = load_dataset(tmp_path)
    assert ds.edge_count == 2
    assert ds.edges.tolist() == [[0, 1], [0, 2]]


def test_load_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nowhere")


def test_roundtrip_write_load(tmp_path, small_ds):
    write_dataset(small_ds, tmp_path / "ds")
    back = load_dataset(tmp_path / "ds", name=small_ds.name)
    assert back.node_count == small_ds.node_count
    assert np.array_equal(back.labels, small_ds.labels)
    assert np.array_equal(back.features, small_ds.features)
    assert np.array_equal(back.edges, small_ds.edges)


def test_synth_deterministic():
    spec = SynthSpec(classes=3, nodes_per_class=10, feature_dim=4, seed=5)
    a, b = synth_dataset(spec), synth_dataset(spec)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.train_mask, b.train_mask)


def test_synth_pure_intra_homophily_one():
    spec = SynthSpec(classes=2, nodes_per_class=10, feature_dim=4,
                     intra_edge_prob=0.8, inter_edge_prob=0.0, seed=1)
    ds = synth_dataset(spec)
    stats = graph_stats(ds, partition_tasks(ds, 2))
    assert stats.edge_count > 0
    assert stats.homophily == 1.0


def test_synth_homophily_matches_hand_count():
    spec = SynthSpec(classes=4, nodes_per_class=50, feature_dim=4,
                     intra_edge_prob=0.1, inter_edge_prob=0.01, seed=3)
    ds = synth_dataset(spec)
    stats = graph_stats(ds, partition_tasks(ds, 2))
    same = sum(1 for u, v in ds.edges.tolist() if ds.labels[u] == ds.labels[v])
    assert stats.homophily == pytest.approx(same / ds.edge_count, abs=1e-12)


def test_synth_rejects_tiny_classes():
    with pytest.raises(ValidationError):
        synth_dataset(SynthSpec(classes=2, nodes_per_class=1, feature_dim=2))


@pytest.mark.parametrize("classes,expected", [(70, 35), (40, 20), (18, 9)])
def test_partition_task_counts(classes, expected):
    ds = synth_dataset(SynthSpec(classes=classes, nodes_per_class=4, feature_dim=2, seed=0))
    assert partition_tasks(ds, 2).task_count == expected


def test_partition_remainder_class():
    ds = synth_dataset(SynthSpec(classes=5, nodes_per_class=6, feature_dim=2, seed=0))
    part = partition_tasks(ds, 2)
    assert part.task_count == 3
    assert part.tasks[-1].class_ids == (4,)


def test_partition_bad_group_size(small_ds):
    with pytest.raises(ValidationError):
        partition_tasks(small_ds, 0)
    with pytest.raises(ValidationError):
        partition_tasks(small_ds, small_ds.class_count + 1)


def test_partition_requires_split(tmp_path):
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1", "1,0,1", "2,1,1", "3,1,1"],
               ["src,dst"])
    with pytest.raises(ValidationError, match="split"):
        partition_tasks(load_dataset(tmp_path), 2)


@settings(max_examples=30, deadline=None)
@given(classes=st.integers(2, 12), cpt=st.integers(1, 12), nodes=st.integers(3, 9))
def test_partition_is_set_partition(classes, cpt, nodes):
    cpt = min(cpt, classes)
    ds = synth_dataset(SynthSpec(classes=classes, nodes_per_class=nodes,
                                 feature_dim=2, seed=classes * 31 + cpt))
    part = partition_tasks(ds, cpt)
    all_train = np.concatenate([t.train_nodes for t in part.tasks])
    assert len(set(all_train.tolist())) == all_train.size
    assert all_train.size == int(ds.train_mask.sum())
    covered = sorted(c for t in part.tasks for c in t.class_ids)
    assert covered == list(range(classes))


def test_split_plain_rounding(small_ds):
    # class of 10 nodes at fraction 0.2 -> 2 test, 8 train
    ds = synth_dataset(SynthSpec(classes=2, nodes_per_class=10, feature_dim=2, seed=2,
                                 test_fraction=0.2))
    for c in range(2):
        members = ds.labels == c
        assert int((ds.test_mask & members).sum()) == 2
        assert int((ds.train_mask & members).sum()) == 8


def test_split_clamp_rule_small_class(tmp_path):
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1", "1,0,1", "2,0,1", "3,1,1", "4,1,1", "5,1,1"],
               ["src,dst"])
    ds = split_train_test(load_dataset(tmp_path), 0.5, seed=9)
    for c in range(2):
        members = ds.labels == c
        # floor(0.5*3 + 0.5) = 2 test, clamped leaves 1 train
        assert int((ds.test_mask & members).sum()) == 2
        assert int((ds.train_mask & members).sum()) == 1


def test_split_deterministic(small_ds):
    base = GraphDataset(name="x", features=small_ds.features, labels=small_ds.labels,
                        edges=small_ds.edges, class_count=small_ds.class_count,
                        train_mask=np.zeros(small_ds.node_count, bool),
                        test_mask=np.zeros(small_ds.node_count, bool))
    a = split_train_test(base, 0.3, seed=4)
    b = split_train_test(base, 0.3, seed=4)
    assert np.array_equal(a.train_mask, b.train_mask)
    assert np.array_equal(a.test_mask, b.test_mask)
    c = split_train_test(base, 0.3, seed=5)
    assert not np.array_equal(a.test_mask, c.test_mask)


@settings(max_examples=25, deadline=None)
@given(size=st.integers(2, 40), frac=st.floats(0.05, 0.95))
def test_split_every_class_covered(size, frac):
    ds = synth_dataset(SynthSpec(classes=2, nodes_per_class=size, feature_dim=2,
                                 seed=size, test_fraction=frac))
    for c in range(2):
        members = ds.labels == c
        assert (ds.train_mask & members).any()
        assert (ds.test_mask & members).any()
    assert not (ds.train_mask & ds.test_mask).any()


def test_stats_triangle_hand_count(tmp_path):
    # triangle over nodes 0,1,2 labeled A,A,B (node 3 isolated to keep the split legal):
    # edges (0,1) same-label, (1,2) and (0,2) cross-label -> h = 1/3
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1", "1,0,1", "2,1,1", "3,1,1"],
               ["src,dst", "0,1", "1,2", "0,2"])
    ds = split_train_test(load_dataset(tmp_path), 0.5, seed=0)
    stats = graph_stats(ds, partition_tasks(ds, 1))
    assert stats.homophily == pytest.approx(1 / 3)
    assert stats.avg_degree == pytest.approx(6 / 4)
    assert stats.density == pytest.approx(6 / 12)


CORAFULL = os.environ.get("MIXSTREAM_CORAFULL", "")


@pytest.mark.skipif(not CORAFULL, reason="no CoraFull export; point MIXSTREAM_CORAFULL "
                                         "at a directory with nodes.csv/edges.csv")
def test_corafull_reference_statistics():
    ds = load_dataset(CORAFULL, name="corafull")
    assert ds.node_count == 19793
    assert ds.edge_count == 130622
    assert ds.class_count == 70
    split = split_train_test(ds, 0.2, seed=0)
    stats = graph_stats(split, partition_tasks(split, 2))
    assert stats.task_count == 35
    assert stats.homophily == pytest.approx(0.57, abs=0.005)
    assert stats.avg_degree == pytest.approx(13.2, abs=0.05)


def test_stats_no_edges_flagged(tmp_path):
    write_csvs(tmp_path,
               ["id,label,f_0", "0,0,1", "1,0,1", "2,1,1", "3,1,1"],
               ["src,dst"])
    ds = split_train_test(load_dataset(tmp_path), 0.5, seed=0)
    stats = graph_stats(ds, partition_tasks(ds, 2))
    assert not stats.homophily_defined
    assert np.isnan(stats.homophily)
