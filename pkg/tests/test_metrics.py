import numpy as np
import pytest

from mixstream.graphs import partition_tasks
from mixstream.learners import OnlineLearner, TrainConfig, propagate_features
from mixstream.metrics import (
    AccuracyMatrix,
    PredictionLogError,
    aggregate_seeds,
    compute_aa,
    compute_af,
    compute_af_s,
    compute_af_unsigned,
    compute_auc,
    eval_points,
    evaluate_stream,
    measure_accuracy,
    score_prediction_log,
    seed_result,
    write_prediction_log,
)
from mixstream.rng import substream
from mixstream.sampler import build_stream
from mixstream.schedule import ScheduleConfig, build_schedule


def matrix(values, steps, delta, total):
    return AccuracyMatrix(values=np.asarray(values, dtype=float),
                          eval_steps=np.asarray(steps), delta=delta, total_batches=total)


def oracle(values, steps, delta, total):
    """Loop-based recomputation of all four metrics."""
    rows, k = len(values), len(values[0])
    aa = sum(values[-1][j] for j in range(k)) / k
    af = 0.0
    for j in range(k):
        peak = max(values[i][j] for i in range(rows))
        af += values[-1][j] - peak
    af /= k
    m = total // delta
    grid = [i for i in range(rows) if steps[i] % delta == 0 and steps[i] <= m * delta]
    if not grid:
        grid = list(range(rows))
    auc = 0.0
    for i in grid:
        auc += sum(values[i][j] for j in range(k)) / k
    auc /= len(grid)
    return aa, af, auc, af


class CoinFlipLearner:
    """Guesses uniformly between the two classes of each node's task."""

    def __init__(self, labels, seed):
        self.labels = labels
        self._rng = substream(seed, "coin")

    def observe(self, batch):
        pass

    def predict_nodes(self, features, nodes):
        lab = self.labels[np.asarray(nodes)]
        flip = self._rng.integers(0, 2, lab.size)
        return np.where(flip == 1, lab, lab ^ 1)


@pytest.fixture
def run(small_ds, small_partition):
    feats = propagate_features(small_ds, 1)
    sched = build_schedule(small_partition, ScheduleConfig(mode="hard", batch_size=10))
    stream = build_stream(small_ds, small_partition, sched, "without", seed=3)
    return small_ds, small_partition, feats, stream


def test_eval_points_grid():
    assert eval_points(20, 5) == [5, 10, 15, 20]
    assert eval_points(22, 5) == [5, 10, 15, 20, 22]
    assert eval_points(7, 7) == [7]
    assert eval_points(5, 9) == [5]
    with pytest.raises(ValueError):
        eval_points(10, 0)


def test_matrix_shape(run):
    ds, part, feats, stream = run
    learner = OnlineLearner("bare", ds.class_count, feats.matrix.shape[1],
                            TrainConfig(hops=1), feats.matrix, 1)
    m = evaluate_stream(learner, stream, part, feats.matrix, delta=3)
    assert m.values.shape == (len(eval_points(stream.length, 3)), part.task_count)
    assert m.eval_steps[-1] == stream.length


def test_delta_equal_t_single_row(run):
    ds, part, feats, stream = run
    learner = OnlineLearner("bare", ds.class_count, feats.matrix.shape[1],
                            TrainConfig(hops=1), feats.matrix, 1)
    m = evaluate_stream(learner, stream, part, feats.matrix, delta=stream.length)
    assert m.values.shape == (1, part.task_count)


def test_chance_level_entries(run):
    ds, part, feats, stream = run
    learner = CoinFlipLearner(part.node_labels, seed=5)
    m = evaluate_stream(learner, stream, part, feats.matrix, delta=4)
    n_test = part.tasks[0].test_nodes.size
    bound = 4 * (0.25 / n_test) ** 0.5       # 4 sigma of Binomial(n, 1/2)/n
    assert np.abs(m.values - 0.5).mean() < bound
    assert m.values.min() >= 0.0 and m.values.max() <= 1.0


def test_measurement_purity(run):
    ds, part, feats, stream = run
    learner = OnlineLearner("er", ds.class_count, feats.matrix.shape[1],
                            TrainConfig(hops=1), feats.matrix, 1)
    before_w = learner.model.weights.tobytes()
    before_b = learner.model.bias.tobytes()
    measure_accuracy(learner, part, feats.matrix)
    assert learner.model.weights.tobytes() == before_w
    assert learner.model.bias.tobytes() == before_b


def test_aa_examples():
    assert compute_aa(matrix([[0.7]], [4], 1, 4)) == pytest.approx(0.7)
    assert compute_aa(matrix([[0.1, 0.9], [0.2, 0.4]], [1, 2], 1, 2)) == pytest.approx(0.3)


def test_af_examples():
    rising = matrix([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]], [1, 2, 3], 1, 3)
    assert compute_af(rising) == 0.0
    single = matrix([[0.9], [0.4]], [1, 2], 1, 2)
    assert compute_af(single) == pytest.approx(-0.5)
    assert compute_af_unsigned(single) == pytest.approx(0.5)


def test_auc_examples():
    const = matrix([[0.5, 0.5], [0.5, 0.5]], [1, 2], 1, 2)
    assert compute_auc(const) == pytest.approx(0.5)
    two = matrix([[0.1, 0.3], [0.3, 0.5]], [2, 4], 2, 4)
    assert compute_auc(two) == pytest.approx(0.3)


def test_delta_one_collapse():
    rng = substream(7, "m")
    vals = rng.random((6, 3))
    m = matrix(vals, list(range(1, 7)), 1, 6)
    assert compute_auc(m) == pytest.approx(float(vals.mean(axis=1).mean()), abs=1e-15)
    assert compute_af_s(m) == compute_af(m)


def test_final_row_excluded_from_auc_when_off_grid():
    # steps 2, 4, 5 with delta=2: AUC over steps 2 and 4 only
    m = matrix([[0.2, 0.2], [0.4, 0.4], [1.0, 1.0]], [2, 4, 5], 2, 5)
    assert compute_auc(m) == pytest.approx(0.3)
    assert compute_aa(m) == pytest.approx(1.0)


def test_oracle_equivalence_random():
    rng = substream(9, "oracle")
    for _ in range(200):
        k = int(rng.integers(1, 6))
        total = int(rng.integers(1, 40))
        delta = int(rng.integers(1, 12))
        steps = eval_points(total, delta)
        vals = rng.random((len(steps), k))
        m = matrix(vals, steps, delta, total)
        aa, af, auc, af_s = oracle(vals.tolist(), steps, delta, total)
        assert abs(compute_aa(m) - aa) <= 1e-12
        assert abs(compute_af(m) - af) <= 1e-12
        assert abs(compute_auc(m) - auc) <= 1e-12
        assert abs(compute_af_s(m) - af_s) <= 1e-12
        assert -1.0 <= compute_af(m) <= 0.0
        assert 0.0 <= compute_auc(m) <= 1.0


def test_score_log_self_consistency(run, tmp_path):
    ds, part, feats, stream = run
    learner = OnlineLearner("er", ds.class_count, feats.matrix.shape[1],
                            TrainConfig(hops=1), feats.matrix, 2)
    log = tmp_path / "pred.csv"
    m = evaluate_stream(learner, stream, part, feats.matrix, delta=2, log_path=log)
    scored = score_prediction_log(log, part)
    assert np.abs(scored.values - m.values).max() <= 1e-12
    assert np.array_equal(scored.eval_steps, m.eval_steps)


def test_score_log_errors(run, tmp_path):
    ds, part, feats, stream = run
    log = tmp_path / "empty.csv"
    log.write_text("eval_step,node_index,predicted_class\n")
    with pytest.raises(PredictionLogError):
        score_prediction_log(log, part)

    train_node = int(np.nonzero(ds.train_mask)[0][0])
    log2 = tmp_path / "train.csv"
    log2.write_text(f"eval_step,node_index,predicted_class\n1,{train_node},0\n")
    with pytest.raises(PredictionLogError, match="not a test node"):
        score_prediction_log(log2, part)

    test_node = int(part.tasks[0].test_nodes[0])
    log3 = tmp_path / "dup.csv"
    log3.write_text("eval_step,node_index,predicted_class\n"
                    f"1,{test_node},0\n1,{test_node},1\n")
    with pytest.raises(PredictionLogError, match="duplicate"):
        score_prediction_log(log3, part)

    log4 = tmp_path / "missing.csv"
    log4.write_text(f"eval_step,node_index,predicted_class\n1,{test_node},0\n")
    with pytest.raises(PredictionLogError, match="misses"):
        score_prediction_log(log4, part)


def test_write_log_rejects_duplicates(tmp_path):
    with pytest.raises(PredictionLogError):
        write_prediction_log([(1, 5, 0), (1, 5, 1)], tmp_path / "x.csv")


def test_aggregate_examples():
    base = dict(af_signed=-0.1, a_auc=0.5, af_s=-0.1)
    results = [seed_result_like(seed=s, aa=v, **base)
               for s, v in zip((1, 2, 3), (0.1, 0.2, 0.3))]
    report = aggregate_seeds(results)
    assert report.mean["aa"] == pytest.approx(0.2)
    assert report.std["aa"] == pytest.approx(0.1)
    shuffled = aggregate_seeds(results[::-1])
    for name in report.mean:
        assert shuffled.mean[name] == pytest.approx(report.mean[name], abs=1e-15)
        assert shuffled.std[name] == pytest.approx(report.std[name], abs=1e-15)

    same = aggregate_seeds([results[0], results[0]])
    assert same.std["aa"] == 0.0

    single = aggregate_seeds([results[0]])
    assert single.std["aa"] == 0.0


def seed_result_like(seed, aa, af_signed, a_auc, af_s):
    from mixstream.metrics import SeedResult
    return SeedResult(seed=seed, aa=aa, af_signed=af_signed, a_auc=a_auc, af_s=af_s)


def test_seed_result_fields(run):
    ds, part, feats, stream = run
    learner = OnlineLearner("bare", ds.class_count, feats.matrix.shape[1],
                            TrainConfig(hops=1), feats.matrix, 1)
    m = evaluate_stream(learner, stream, part, feats.matrix, delta=1)
    r = seed_result(m, seed=1)
    assert r.aa == compute_aa(m)
    assert r.af_signed == compute_af(m)
    assert r.af_signed <= 0.0
