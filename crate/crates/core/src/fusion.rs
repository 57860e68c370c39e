//! Visual and metadata projections, cross-attention fusion with the graph
//! feature, and the classifier head.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ExprBuilder, Matrix, NodeId};
use crate::error::{Error, Result};
use crate::task::Task;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMode {
    /// Keys/values are two tokens: the lifted visual and metadata features.
    #[default]
    ModalityToken,
    /// `Q = F_g`, `K = V = F_a` as single tokens; reduces to `F = F_a`.
    Literal,
}

impl std::str::FromStr for FusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modality-token" | "token" => Ok(FusionMode::ModalityToken),
            "literal" => Ok(FusionMode::Literal),
            other => Err(Error::Config(format!("unknown fusion mode '{other}'"))),
        }
    }
}

/// Frame-wise mean of per-frame visual vectors (`frames × D_v → 1 × D_v`).
pub fn mean_frames(frames: &Matrix) -> Result<Matrix> {
    if frames.nrows() == 0 {
        return Err(Error::Data("visual input has no frames".into()));
    }
    let n = frames.nrows() as f64;
    let mut mean = Matrix::zeros((1, frames.ncols()));
    for row in frames.rows() {
        mean.row_mut(0).zip_mut_with(&row, |m, &x| *m += x);
    }
    mean.mapv_inplace(|x| x / n);
    Ok(mean)
}

/// Standardisation constants for `log(1 + seconds)`, fitted on a training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub mean: f64,
    pub sd: f64,
}

impl Default for DurationStats {
    fn default() -> Self {
        Self { mean: 0.0, sd: 1.0 }
    }
}

impl DurationStats {
    pub fn fit(durations: impl IntoIterator<Item = f64>) -> Result<Self> {
        let logs: Vec<f64> = durations
            .into_iter()
            .map(|s| {
                if s > 0.0 && s.is_finite() {
                    Ok(s.ln_1p())
                } else {
                    Err(Error::Data(format!("duration must be positive, got {s}")))
                }
            })
            .collect::<Result<_>>()?;
        if logs.is_empty() {
            return Err(Error::Data("no durations to fit".into()));
        }
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        Ok(Self { mean, sd })
    }

    pub fn normalize(&self, seconds: f64) -> Result<f64> {
        if !(seconds > 0.0 && seconds.is_finite()) {
            return Err(Error::Data(format!("duration must be positive, got {seconds}")));
        }
        Ok((seconds.ln_1p() - self.mean) / self.sd)
    }
}

/// `title ⊕ description ⊕ normalized duration` as a `1 × (2·D_t + 1)` row.
/// A missing description contributes a zero block.
pub fn metadata_vector(
    title: &[f64],
    description: Option<&[f64]>,
    duration_seconds: f64,
    stats: &DurationStats,
) -> Result<Matrix> {
    let dim = title.len();
    if let Some(d) = description {
        if d.len() != dim {
            return Err(Error::Data(format!(
                "description embedding has dimension {}, title has {dim}",
                d.len()
            )));
        }
    }
    let mut row = Vec::with_capacity(2 * dim + 1);
    row.extend_from_slice(title);
    match description {
        Some(d) => row.extend_from_slice(d),
        None => row.extend(std::iter::repeat_n(0.0, dim)),
    }
    row.push(stats.normalize(duration_seconds)?);
    Ok(Matrix::from_shape_vec((1, row.len()), row).expect("length matches"))
}

fn affine(b: &mut ExprBuilder, x: NodeId, prefix: &str, out: usize) -> Result<NodeId> {
    let input = b.shape(x).1;
    let w = b.param(&format!("{prefix}.w"), (input, out))?;
    let bias = b.param(&format!("{prefix}.bias"), (1, out))?;
    let xw = b.matmul(x, w)?;
    Ok(b.add(xw, bias)?)
}

/// Affine map of the mean visual vector to `d/2` (no nonlinearity).
pub fn project_visual(b: &mut ExprBuilder, visual_mean: NodeId, half: usize) -> Result<NodeId> {
    affine(b, visual_mean, "visual", half)
}

/// Affine map of the metadata row to `d/2`.
pub fn project_metadata(b: &mut ExprBuilder, metadata: NodeId, half: usize) -> Result<NodeId> {
    affine(b, metadata, "meta", half)
}

/// `F_a = F_v ⊕ F_m`, visual first.
pub fn concat_modalities(b: &mut ExprBuilder, visual: NodeId, metadata: NodeId) -> Result<NodeId> {
    if b.shape(visual) != b.shape(metadata) {
        return Err(Error::Data(format!(
            "modality features differ in shape: {:?} vs {:?}",
            b.shape(visual),
            b.shape(metadata)
        )));
    }
    Ok(b.concat_cols(&[visual, metadata])?)
}

pub struct AttentionNodes {
    pub output: NodeId,
    /// Softmax weights over keys (`1×2` for modality tokens, `1×1` literal).
    pub weights: NodeId,
}

/// Scaled dot-product cross-attention with the graph feature as the query.
pub fn cross_attention(
    b: &mut ExprBuilder,
    graph: NodeId,
    visual: NodeId,
    metadata: NodeId,
    mode: FusionMode,
) -> Result<AttentionNodes> {
    let d = b.shape(graph).1;
    let scale = 1.0 / (d as f64).sqrt();
    let (query, keys, values) = match mode {
        FusionMode::Literal => {
            let fa = concat_modalities(b, visual, metadata)?;
            (graph, fa, fa)
        }
        FusionMode::ModalityToken => {
            let lifted_v = affine(b, visual, "attn.lift_v", d)?;
            let lifted_m = affine(b, metadata, "attn.lift_m", d)?;
            let tv = b.transpose(lifted_v)?;
            let tm = b.transpose(lifted_m)?;
            let columns = b.concat_cols(&[tv, tm])?;
            let tokens = b.transpose(columns)?; // 2×d
            let wq = b.param("attn.q", (d, d))?;
            let wk = b.param("attn.k", (d, d))?;
            let wv = b.param("attn.v", (d, d))?;
            let q = b.matmul(graph, wq)?;
            let k = b.matmul(tokens, wk)?;
            let v = b.matmul(tokens, wv)?;
            (q, k, v)
        }
    };
    if b.shape(query).1 != b.shape(keys).1 {
        return Err(Error::Data(format!(
            "query width {} differs from key width {}",
            b.shape(query).1,
            b.shape(keys).1
        )));
    }
    let kt = b.transpose(keys)?;
    let raw = b.matmul(query, kt)?;
    let scores = b.scale(raw, scale)?;
    let weights = b.softmax_rows(scores)?;
    let output = b.matmul(weights, values)?;
    Ok(AttentionNodes { output, weights })
}

/// Width of the hidden classifier layer for fused width `d`.
pub fn classifier_hidden(d: usize) -> usize {
    (d / 4).max(1)
}

/// dropout → affine `d→d/4` → ReLU → affine → sigmoid (binary) or softmax.
/// `dropout_mask` is a `1×d` input holding 0 or `1/(1−p)` per unit during
/// training and all ones at inference.
pub fn classify(b: &mut ExprBuilder, features: NodeId, dropout_mask: NodeId, task: Task) -> Result<NodeId> {
    let d = b.shape(features).1;
    let dropped = b.mul(features, dropout_mask)?;
    let hidden = affine(b, dropped, "head.1", classifier_hidden(d))?;
    let hidden = b.relu(hidden)?;
    let logits = affine(b, hidden, "head.2", task.output_width())?;
    Ok(if task.is_binary() {
        b.sigmoid(logits)?
    } else {
        b.softmax_rows(logits)?
    })
}
