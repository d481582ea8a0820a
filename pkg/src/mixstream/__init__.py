"""Task-free continual-learning streams from static node-classification graphs.

Pipeline: load or synthesize a graph dataset, split it, decompose classes
into latent tasks, schedule a transition regime (hard, boundary-local,
global-mixing, or Gaussian drift), materialize a deterministic stream of
mini-batches, run reference online learners over it, and score them with
stream-level accuracy and forgetting metrics.
"""

from .graphs import (
    DataError,
    GraphDataset,
    GraphStats,
    ParseError,
    SynthSpec,
    Task,
    TaskPartition,
    ValidationError,
    graph_stats,
    load_dataset,
    partition_tasks,
    split_train_test,
    synth_dataset,
    write_dataset,
)
from .learners import (
    LearnerBatch,
    LinearModel,
    NumericError,
    OnlineLearner,
    PropagatedFeatures,
    ReservoirBuffer,
    TrainConfig,
    learner_view,
    load_checkpoint,
    observe_agem,
    observe_bare,
    observe_er,
    predict,
    propagate_features,
    save_checkpoint,
    train_joint,
)
from .metrics import (
    AccuracyMatrix,
    MetricReport,
    SeedResult,
    aggregate_seeds,
    compute_aa,
    compute_af,
    compute_af_s,
    compute_af_unsigned,
    compute_auc,
    evaluate_stream,
    export_accuracy_matrix,
    measure_accuracy,
    score_prediction_log,
    seed_result,
    write_prediction_log,
)
from .sampler import (
    SamplerError,
    SamplerState,
    Stream,
    StreamBatch,
    StreamProvenance,
    allocate_counts,
    build_boundary_local_stream,
    build_global_mix_stream,
    build_stream,
    next_batch_with_replacement,
    next_batch_without_replacement,
)
from .schedule import (
    ScheduleConfig,
    ScheduleError,
    TransitionSchedule,
    build_schedule,
    export_mixing_curve,
    gaussian_weights,
    hard_weights,
    overlap_index,
    task_centers,
)
from .streamio import (
    StreamDigestError,
    StreamFileError,
    StreamTruncationError,
    StreamVersionError,
    read_stream,
    write_stream,
)

__version__ = "0.1.0"
