//! Full classifier: graph encoder, optional multimodal fusion, head and loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Bindings, Expr, ExprBuilder, Gradients, Matrix, NodeId, ParamStore};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::fusion::{self, DurationStats, FusionMode};
use crate::gnn::{self, GnnConfig, GraphOperators};
use crate::task::Task;

pub const INPUT_VISUAL: &str = "sample.visual";
pub const INPUT_METADATA: &str = "sample.metadata";
pub const INPUT_TARGET: &str = "sample.target";
pub const INPUT_DROPOUT: &str = "sample.dropout_mask";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Classifier on the pooled graph feature alone.
    GraphOnly,
    /// Graph feature fused with visual and metadata features.
    #[default]
    Mogam,
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graph-only" | "graph" => Ok(Architecture::GraphOnly),
            "mogam" | "multimodal" => Ok(Architecture::Mogam),
            other => Err(Error::Config(format!("unknown architecture '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub task: Task,
    pub architecture: Architecture,
    pub fusion: FusionMode,
    pub gnn: GnnConfig,
    pub vocab_size: usize,
    pub visual_dim: usize,
    pub text_dim: usize,
    pub dropout: f64,
}

impl ModelSpec {
    /// Fused feature width `d` (the last GNN layer width).
    pub fn hidden(&self) -> usize {
        self.gnn.output_width()
    }

    pub fn metadata_width(&self) -> usize {
        2 * self.text_dim + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.gnn.validate()?;
        let d = self.hidden();
        if !d.is_multiple_of(2) {
            return Err(Error::Config(format!("hidden width d must be even, got {d}")));
        }
        if self.vocab_size == 0 || self.visual_dim == 0 || self.text_dim == 0 {
            return Err(Error::Config("vocabulary and embedding sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    /// Row name used in report tables, e.g. "MOGAM with GAT".
    pub fn display_name(&self) -> String {
        let gnn = self.gnn.kind.display_name();
        match (self.architecture, self.fusion) {
            (Architecture::GraphOnly, _) => gnn.to_string(),
            (Architecture::Mogam, FusionMode::ModalityToken) => format!("MOGAM with {gnn}"),
            (Architecture::Mogam, FusionMode::Literal) => format!("MOGAM with {gnn} (literal attention)"),
        }
    }
}

/// Model inputs for one vlog, ready to bind.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub id: String,
    pub ops: GraphOperators,
    pub visual: Matrix,
    pub metadata: Matrix,
    /// `1×1` (binary) or `1×3` one-hot target, when labelled for this task.
    pub target: Option<Matrix>,
    pub class: Option<usize>,
}

/// Compiled expressions for one [`ModelSpec`].
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    loss: Expr,
    probs: Expr,
    attention: Option<Expr>,
    inference_mask: Matrix,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.hidden();
        let mut b = ExprBuilder::new();
        let encoder = gnn::build_encoder(&mut b, &spec.gnn, spec.vocab_size)?;
        let dropout = b.input(INPUT_DROPOUT, (1, d))?;
        let (features, attention): (NodeId, Option<NodeId>) = match spec.architecture {
            Architecture::GraphOnly => (encoder.pooled, None),
            Architecture::Mogam => {
                let visual = b.input(INPUT_VISUAL, (1, spec.visual_dim))?;
                let metadata = b.input(INPUT_METADATA, (1, spec.metadata_width()))?;
                let fv = fusion::project_visual(&mut b, visual, d / 2)?;
                let fm = fusion::project_metadata(&mut b, metadata, d / 2)?;
                let att = fusion::cross_attention(&mut b, encoder.pooled, fv, fm, spec.fusion)?;
                (att.output, Some(att.weights))
            }
        };
        let probs = fusion::classify(&mut b, features, dropout, spec.task)?;
        let target = b.input(INPUT_TARGET, (1, spec.task.output_width()))?;
        let loss = if spec.task.is_binary() {
            b.binary_cross_entropy(probs, target)?
        } else {
            b.categorical_cross_entropy(probs, target)?
        };
        Ok(Self {
            loss: b.finish(loss),
            probs: b.finish(probs),
            attention: attention.map(|a| b.finish(a)),
            inference_mask: Matrix::ones((1, d)),
            spec,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn loss_expr(&self) -> &Expr {
        &self.loss
    }

    pub fn param_shapes(&self) -> Vec<(String, (usize, usize))> {
        let mut shapes: Vec<_> = self
            .loss
            .trainable_inputs()
            .into_iter()
            .map(|(n, s)| (n.to_string(), s))
            .collect();
        shapes.sort();
        shapes
    }

    /// Glorot-uniform weights and zero biases, drawn in name order.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.param_shapes()
            .into_iter()
            .map(|(name, (rows, cols))| {
                let m = if name.ends_with(".bias") {
                    Matrix::zeros((rows, cols))
                } else {
                    let limit = (6.0 / (rows + cols) as f64).sqrt();
                    Matrix::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
                };
                (name, m)
            })
            .collect()
    }

    pub fn check_params(&self, params: &ParamStore) -> Result<()> {
        for (name, shape) in self.param_shapes() {
            match params.get(&name) {
                Some(m) if m.dim() == shape => {}
                Some(m) => {
                    return Err(Error::Data(format!(
                        "parameter '{name}' is {:?}, model expects {shape:?}",
                        m.dim()
                    )))
                }
                None => return Err(Error::Data(format!("missing parameter '{name}'"))),
            }
        }
        Ok(())
    }

    /// Turns a loaded sample into bindable inputs.
    pub fn prepare(&self, sample: &Sample, stats: &DurationStats) -> Result<PreparedSample> {
        let spec = &self.spec;
        if sample.graph.node_count() != spec.vocab_size {
            return Err(Error::Data(format!(
                "sample '{}' graph has {} nodes, model expects {}",
                sample.id,
                sample.graph.node_count(),
                spec.vocab_size
            )));
        }
        if sample.visual_frames.ncols() != spec.visual_dim || sample.title.len() != spec.text_dim {
            return Err(Error::Data(format!(
                "sample '{}' embedding dimensions ({}, {}) differ from model ({}, {})",
                sample.id,
                sample.visual_frames.ncols(),
                sample.title.len(),
                spec.visual_dim,
                spec.text_dim
            )));
        }
        let ops = GraphOperators::for_graph(&sample.graph, &spec.gnn)?;
        let visual = fusion::mean_frames(&sample.visual_frames)?;
        let metadata =
            fusion::metadata_vector(&sample.title, sample.description.as_deref(), sample.duration_seconds, stats)?;
        let class = sample.label.and_then(|l| spec.task.class_index(l));
        let target = class.map(|c| {
            if spec.task.is_binary() {
                Matrix::from_elem((1, 1), c as f64)
            } else {
                let mut t = Matrix::zeros((1, spec.task.num_classes()));
                t[[0, c]] = 1.0;
                t
            }
        });
        Ok(PreparedSample {
            id: sample.id.clone(),
            ops,
            visual,
            metadata,
            target,
            class,
        })
    }

    fn bindings<'a>(&'a self, params: &'a ParamStore, sample: &'a PreparedSample, mask: &'a Matrix) -> Bindings<'a> {
        let mut bind = Bindings::new();
        for (name, m) in params {
            bind.insert_ref(name.as_str(), m);
        }
        sample.ops.bind(&mut bind);
        bind.insert_ref(INPUT_VISUAL, &sample.visual);
        bind.insert_ref(INPUT_METADATA, &sample.metadata);
        bind.insert_ref(INPUT_DROPOUT, mask);
        if let Some(t) = &sample.target {
            bind.insert_ref(INPUT_TARGET, t);
        }
        bind
    }

    /// Bindings for a labelled sample, e.g. for gradient checking.
    pub fn training_bindings<'a>(
        &'a self,
        params: &'a ParamStore,
        sample: &'a PreparedSample,
        mask: &'a Matrix,
    ) -> Bindings<'a> {
        self.bindings(params, sample, mask)
    }

    /// Loss and parameter gradients for one labelled sample.
    pub fn loss_and_gradients(
        &self,
        params: &ParamStore,
        sample: &PreparedSample,
        dropout_mask: &Matrix,
    ) -> Result<(f64, Gradients)> {
        if sample.target.is_none() {
            return Err(Error::Data(format!("sample '{}' has no label for this task", sample.id)));
        }
        let bind = self.bindings(params, sample, dropout_mask);
        Ok(self.loss.value_and_gradients(&bind)?)
    }

    pub fn loss(&self, params: &ParamStore, sample: &PreparedSample) -> Result<f64> {
        if sample.target.is_none() {
            return Err(Error::Data(format!("sample '{}' has no label for this task", sample.id)));
        }
        let bind = self.bindings(params, sample, &self.inference_mask);
        Ok(self.loss.evaluate(&bind)?[[0, 0]])
    }

    /// Class probabilities in task class order (dropout disabled).
    pub fn predict(&self, params: &ParamStore, sample: &PreparedSample) -> Result<Vec<f64>> {
        let bind = self.bindings(params, sample, &self.inference_mask);
        let out = self.probs.evaluate(&bind)?;
        Ok(if self.spec.task.is_binary() {
            let p = out[[0, 0]];
            vec![1.0 - p, p]
        } else {
            out.iter().copied().collect()
        })
    }

    /// Cross-attention weights for one sample (MOGAM only).
    pub fn attention_weights(&self, params: &ParamStore, sample: &PreparedSample) -> Result<Option<Vec<f64>>> {
        let Some(expr) = &self.attention else {
            return Ok(None);
        };
        let bind = self.bindings(params, sample, &self.inference_mask);
        Ok(Some(expr.evaluate(&bind)?.iter().copied().collect()))
    }

    /// Inverted-dropout mask: each unit kept with probability `1 − p` and
    /// scaled by `1/(1 − p)`. All ones when `p = 0`.
    pub fn dropout_mask<R: Rng>(&self, rng: &mut R) -> Matrix {
        let p = self.spec.dropout;
        if p == 0.0 {
            return self.inference_mask.clone();
        }
        let keep = 1.0 / (1.0 - p);
        Matrix::from_shape_simple_fn((1, self.spec.hidden()), || if rng.random::<f64>() < p { 0.0 } else { keep })
    }
}

/// Everything needed to reuse a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub spec: ModelSpec,
    pub duration_stats: DurationStats,
    pub params: ParamStore,
}

/// Index of the most probable class; binary tasks use a 0.5 threshold on
/// the positive class.
pub fn predicted_class(probs: &[f64]) -> usize {
    if probs.len() == 2 {
        return usize::from(probs[1] >= 0.5);
    }
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}
