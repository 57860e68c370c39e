use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::split::SplitRatios;
use crate::autodiff::{adam_step, AdamConfig, AdamState, AutodiffError, Gradients, Matrix, ParamStore};
use crate::error::{Error, Result};
use crate::fusion::FusionMode;
use crate::gnn::{GnnConfig, GnnKind};
use crate::model::{predicted_class, Architecture, Model, ModelSpec, PreparedSample};
use crate::par::{self, Execution};
use crate::task::Task;

/// Samples per gradient work unit. Per-sample gradients are summed inside a
/// chunk in order, then chunk sums are added in chunk order, so the result
/// does not depend on the thread count.
pub const GRAD_CHUNK: usize = 4;

/// RNG stream for shuffling and dropout.
pub const TRAIN_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub architecture: Architecture,
    pub gnn: GnnKind,
    pub fusion: FusionMode,
    pub batch_size: usize,
    pub epochs: usize,
    /// Width `d` of the final GNN layer and the fused feature.
    pub hidden: usize,
    /// Widths of the GNN layers before the last one.
    pub gnn_hidden: Vec<usize>,
    pub heads: usize,
    pub gat_edge_weights: bool,
    pub unweighted_mean: bool,
    pub lr: f64,
    pub dropout: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub split: SplitRatios,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::DailyVsDepression,
            architecture: Architecture::Mogam,
            gnn: GnnKind::Gat,
            fusion: FusionMode::ModalityToken,
            batch_size: 32,
            epochs: 500,
            hidden: 1024,
            gnn_hidden: vec![256],
            heads: 1,
            gat_edge_weights: false,
            unweighted_mean: false,
            lr: 1e-4,
            dropout: 0.5,
            seed: 0,
            repetitions: 5,
            split: SplitRatios::default(),
            execution: Execution::Parallel,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.split.validate()?;
        AdamConfig::with_lr(self.lr).validate()?;
        Ok(())
    }

    pub fn gnn_config(&self) -> GnnConfig {
        let mut widths = self.gnn_hidden.clone();
        widths.push(self.hidden);
        GnnConfig {
            kind: self.gnn,
            widths,
            heads: self.heads,
            gat_edge_weights: self.gat_edge_weights,
            unweighted_mean: self.unweighted_mean,
        }
    }

    pub fn model_spec(&self, vocab_size: usize, visual_dim: usize, text_dim: usize) -> ModelSpec {
        ModelSpec {
            task: self.task,
            architecture: self.architecture,
            fusion: self.fusion,
            gnn: self.gnn_config(),
            vocab_size,
            visual_dim,
            text_dim,
            dropout: self.dropout,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch (dropout active).
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Parameters after the best validation epoch.
    pub params: ParamStore,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub probabilities: Vec<f64>,
    pub predicted: usize,
    pub truth: Option<usize>,
}

/// Class probabilities for every sample, dropout disabled.
pub fn predict_all(
    model: &Model,
    params: &ParamStore,
    samples: &[PreparedSample],
    exec: Execution,
) -> Result<Vec<Prediction>> {
    par::try_map(samples, exec, |s| {
        let probabilities = model.predict(params, s)?;
        Ok(Prediction {
            id: s.id.clone(),
            predicted: predicted_class(&probabilities),
            probabilities,
            truth: s.class,
        })
    })
}

pub fn evaluate(model: &Model, params: &ParamStore, samples: &[PreparedSample], exec: Execution) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::Data("cannot evaluate an empty sample set".into()));
    }
    let preds = predict_all(model, params, samples, exec)?;
    let mut truth = Vec::with_capacity(preds.len());
    for p in &preds {
        truth.push(p.truth.ok_or_else(|| Error::Data(format!("sample '{}' has no label for this task", p.id)))?);
    }
    let predicted: Vec<usize> = preds.iter().map(|p| p.predicted).collect();
    Metrics::from_predictions(&truth, &predicted, model.spec().task.num_classes())
}

fn add_into(acc: &mut Gradients, g: Gradients) {
    for (name, m) in g {
        match acc.get_mut(&name) {
            Some(a) => *a += &m,
            None => {
                acc.insert(name, m);
            }
        }
    }
}

/// Mean loss and mean gradients over a batch of (sample, dropout mask).
pub fn batch_gradients(
    model: &Model,
    params: &ParamStore,
    batch: &[(&PreparedSample, Matrix)],
    exec: Execution,
) -> Result<(f64, Gradients)> {
    let parts = par::map_chunks(batch, GRAD_CHUNK, exec, |chunk| -> Result<(f64, Gradients)> {
        let mut loss = 0.0;
        let mut acc = Gradients::new();
        for (sample, mask) in chunk {
            let (l, g) = model.loss_and_gradients(params, sample, mask)?;
            loss += l;
            add_into(&mut acc, g);
        }
        Ok((loss, acc))
    });
    let mut loss = 0.0;
    let mut grads = Gradients::new();
    for part in parts {
        let (l, g) = part?;
        loss += l;
        add_into(&mut grads, g);
    }
    let n = batch.len() as f64;
    for g in grads.values_mut() {
        g.mapv_inplace(|x| x / n);
    }
    Ok((loss / n, grads))
}

/// Mini-batch Adam with per-epoch validation. Returns the parameters of the
/// epoch with the highest validation macro-F1; ties keep the earlier epoch.
pub fn train(
    model: &Model,
    config: &TrainConfig,
    init: ParamStore,
    train_set: &[PreparedSample],
    val_set: &[PreparedSample],
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    model.check_params(&init)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRAIN_STREAM);
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr))?;
    let mut params = init;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ParamStore)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            // masks are drawn sequentially so the stream is thread-independent
            let batch: Vec<(&PreparedSample, Matrix)> =
                idx.iter().map(|&i| (&train_set[i], model.dropout_mask(&mut rng))).collect();
            let (loss, grads) = batch_gradients(model, &params, &batch, config.execution)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1, detail: format!("loss is {loss}") });
            }
            adam_step(&mut params, &grads, &mut adam).map_err(|e| match e {
                AutodiffError::NonFiniteGradient { .. } => Error::Diverged { epoch, batch: b + 1, detail: e.to_string() },
                other => other.into(),
            })?;
            loss_sum += loss * idx.len() as f64;
        }
        let val = evaluate(model, &params, val_set, config.execution)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_accuracy: val.accuracy,
            val_macro_f1: val.macro_f1,
        };
        log::debug!(
            "epoch {epoch}: loss {:.6} val acc {:.4} val macro-F1 {:.4}",
            record.train_loss,
            record.val_accuracy,
            record.val_macro_f1
        );
        if best.as_ref().is_none_or(|(_, f1, _)| val.macro_f1 > *f1) {
            best = Some((epoch, val.macro_f1, params.clone()));
        }
        history.push(record);
    }
    let (best_epoch, best_val_macro_f1, params) = best.expect("at least one epoch");
    Ok(TrainOutcome { params, best_epoch, best_val_macro_f1, history })
}
