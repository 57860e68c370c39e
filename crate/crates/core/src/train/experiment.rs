use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::split::{split_dataset, Split};
use super::trainer::{evaluate, train, EpochRecord, TrainConfig};
use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::fusion::DurationStats;
use crate::model::{Model, ModelParameters, PreparedSample};
use crate::par;
use crate::task::{Label, Task};

/// A trained repetition: the selected parameters and the split they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub repetition: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub model: ModelParameters,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub test: Metrics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregate {
    pub label: Label,
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub f1: MeanSd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: MeanSd,
    pub macro_f1: MeanSd,
    pub per_class: Vec<ClassAggregate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub task: Task,
    pub seed: u64,
    pub repetitions: Vec<RepetitionResult>,
    pub aggregate: Aggregate,
}

pub fn aggregate(task: Task, results: &[RepetitionResult]) -> Result<Aggregate> {
    if results.is_empty() {
        return Err(Error::Data("no repetitions to aggregate".into()));
    }
    let pick = |f: &dyn Fn(&Metrics) -> f64| MeanSd::of(&results.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
    let per_class = task
        .classes()
        .iter()
        .enumerate()
        .map(|(c, &label)| ClassAggregate {
            label,
            precision: pick(&|m| m.per_class[c].precision),
            recall: pick(&|m| m.per_class[c].recall),
            f1: pick(&|m| m.per_class[c].f1),
        })
        .collect();
    Ok(Aggregate { accuracy: pick(&|m| m.accuracy), macro_f1: pick(&|m| m.macro_f1), per_class })
}

/// Samples labelled for `task`, with their class indices.
pub fn task_samples(dataset: &Dataset, task: Task) -> (Vec<&Sample>, Vec<usize>) {
    let samples = dataset.for_task(task);
    let classes = samples
        .iter()
        .map(|s| s.label.and_then(|l| task.class_index(l)).expect("filtered by task"))
        .collect();
    (samples, classes)
}

fn prepare(model: &Model, samples: &[&Sample], stats: &DurationStats, config: &TrainConfig) -> Result<Vec<PreparedSample>> {
    par::try_map(samples, config.execution, |s| model.prepare(s, stats))
}

fn pick_ids(samples: &[&Sample], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| samples[i].id.clone()).collect()
}

/// Split, initialise and train repetition `r` with seed `config.seed + r`.
pub fn train_repetition(config: &TrainConfig, dataset: &Dataset, repetition: usize) -> Result<Checkpoint> {
    config.validate()?;
    let seed = config.seed.wrapping_add(repetition as u64);
    let spec = config.model_spec(dataset.vocabulary.len(), dataset.visual_dim, dataset.text_dim);
    let model = Model::new(spec.clone())?;
    let (samples, classes) = task_samples(dataset, config.task);
    let Split { train: tr, val, test } = split_dataset(&classes, config.split, seed)?;
    let stats = DurationStats::fit(tr.iter().map(|&i| samples[i].duration_seconds))?;
    let subset = |idx: &[usize]| idx.iter().map(|&i| samples[i]).collect::<Vec<_>>();
    let train_set = prepare(&model, &subset(&tr), &stats, config)?;
    let val_set = prepare(&model, &subset(&val), &stats, config)?;
    let outcome = train(&model, config, model.init_params(seed), &train_set, &val_set, seed)?;
    log::info!(
        "repetition {} (seed {seed}): best epoch {} with validation macro-F1 {:.4}",
        repetition + 1,
        outcome.best_epoch,
        outcome.best_val_macro_f1
    );
    Ok(Checkpoint {
        repetition,
        seed,
        best_epoch: outcome.best_epoch,
        best_val_macro_f1: outcome.best_val_macro_f1,
        train_ids: pick_ids(&samples, &tr),
        val_ids: pick_ids(&samples, &val),
        test_ids: pick_ids(&samples, &test),
        model: ModelParameters { spec, duration_stats: stats, params: outcome.params },
        history: outcome.history,
    })
}

/// Test-split metrics of a checkpoint.
pub fn evaluate_checkpoint(checkpoint: &Checkpoint, dataset: &Dataset, exec: par::Execution) -> Result<RepetitionResult> {
    let model = Model::new(checkpoint.model.spec.clone())?;
    model.check_params(&checkpoint.model.params)?;
    let samples = checkpoint
        .test_ids
        .iter()
        .map(|id| {
            dataset
                .samples
                .iter()
                .find(|s| &s.id == id)
                .ok_or_else(|| Error::Data(format!("test sample '{id}' is not in the dataset")))
        })
        .collect::<Result<Vec<_>>>()?;
    let prepared = par::try_map(&samples, exec, |s| model.prepare(s, &checkpoint.model.duration_stats))?;
    let test = evaluate(&model, &checkpoint.model.params, &prepared, exec)?;
    Ok(RepetitionResult { repetition: checkpoint.repetition, seed: checkpoint.seed, best_epoch: checkpoint.best_epoch, test })
}

pub fn report(config: &TrainConfig, results: Vec<RepetitionResult>) -> Result<EvaluationReport> {
    let spec = config.model_spec(1, 1, 1);
    Ok(EvaluationReport {
        model: spec.display_name(),
        task: config.task,
        seed: config.seed,
        aggregate: aggregate(config.task, &results)?,
        repetitions: results,
    })
}

pub struct ExperimentOutcome {
    pub report: EvaluationReport,
    pub checkpoints: Vec<Checkpoint>,
}

/// Re-split, re-initialise, train and test `config.repetitions` times.
pub fn run_experiment(config: &TrainConfig, dataset: &Dataset) -> Result<ExperimentOutcome> {
    config.validate()?;
    let mut checkpoints = Vec::with_capacity(config.repetitions);
    let mut results = Vec::with_capacity(config.repetitions);
    for r in 0..config.repetitions {
        let ckpt = train_repetition(config, dataset, r)?;
        results.push(evaluate_checkpoint(&ckpt, dataset, config.execution)?);
        checkpoints.push(ckpt);
    }
    Ok(ExperimentOutcome { report: report(config, results)?, checkpoints })
}
