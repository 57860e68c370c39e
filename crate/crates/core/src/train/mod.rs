//! Splitting, training, checkpoint selection and evaluation reports.

mod experiment;
mod metrics;
mod report;
mod split;
mod trainer;

pub use experiment::{
    aggregate, evaluate_checkpoint, report, run_experiment, task_samples, train_repetition, Aggregate, Checkpoint,
    ClassAggregate, EvaluationReport, ExperimentOutcome, MeanSd, RepetitionResult,
};
pub use metrics::{ClassMetrics, ConfusionMatrix, Metrics};
pub use report::render_report;
pub use split::{split_dataset, Split, SplitRatios, SPLIT_STREAM};
pub use trainer::{
    batch_gradients, evaluate, predict_all, train, EpochRecord, Prediction, TrainConfig, TrainOutcome, GRAD_CHUNK,
    TRAIN_STREAM,
};
