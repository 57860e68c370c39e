//! Object co-occurrence graphs built from per-frame detection records.

use std::collections::{HashMap, HashSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Matrix;

/// COCO class names in detector index order.
pub const COCO_CLASSES: [&str; 80] = [
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat",
    "traffic light", "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog",
    "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella",
    "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard", "tennis racket", "bottle",
    "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple", "sandwich", "orange",
    "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "couch", "potted plant",
    "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote", "keyboard", "cell phone",
    "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors",
    "teddy bear", "hair drier", "toothbrush",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("vlog '{vlog_id}' frame {frame_index}: class id {class_id} outside vocabulary of size {size}")]
    UnknownClass {
        vlog_id: String,
        frame_index: u64,
        class_id: usize,
        size: usize,
    },
    #[error("vlog '{0}' has zero frames")]
    EmptyVlog(String),
    #[error("invalid detection log '{vlog_id}': {detail}")]
    InvalidLog { vlog_id: String, detail: String },
    #[error("adjacency is {0}")]
    InvalidAdjacency(String),
}

/// Ordered object class names with a reverse index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectVocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl ObjectVocabulary {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, GraphError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(GraphError::InvalidVocabulary("no classes".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(GraphError::InvalidVocabulary(format!("duplicate class '{name}'")));
            }
        }
        Ok(Self { names, index })
    }

    /// The 80-class COCO vocabulary.
    pub fn coco() -> Self {
        Self::new(COCO_CLASSES).expect("COCO names are unique")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: usize,
    pub instance_tag: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: u64,
    pub instances: Vec<Detection>,
}

/// Detections for one vlog. Frames without detections may be omitted from
/// `frames` but are still counted by `frame_count`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionLog {
    pub vlog_id: String,
    pub frames: Vec<FrameDetections>,
    pub frame_count: u64,
}

impl DetectionLog {
    pub fn new(vlog_id: impl Into<String>, frames: Vec<FrameDetections>, frame_count: u64) -> Result<Self, GraphError> {
        let log = Self {
            vlog_id: vlog_id.into(),
            frames,
            frame_count,
        };
        log.validate()?;
        Ok(log)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let invalid = |detail: String| GraphError::InvalidLog {
            vlog_id: self.vlog_id.clone(),
            detail,
        };
        if self.frame_count == 0 {
            return Err(GraphError::EmptyVlog(self.vlog_id.clone()));
        }
        if self.frames.len() as u64 > self.frame_count {
            return Err(invalid(format!(
                "{} stored frames exceed frame_count {}",
                self.frames.len(),
                self.frame_count
            )));
        }
        let mut previous: Option<u64> = None;
        for frame in &self.frames {
            if previous.is_some_and(|p| frame.frame_index <= p) {
                return Err(invalid(format!("frame index {} is not increasing", frame.frame_index)));
            }
            if frame.frame_index >= self.frame_count {
                return Err(invalid(format!(
                    "frame index {} outside frame_count {}",
                    frame.frame_index, self.frame_count
                )));
            }
            let mut tags = HashSet::new();
            for d in &frame.instances {
                if !tags.insert(d.instance_tag) {
                    return Err(invalid(format!(
                        "frame {}: duplicate instance tag {}",
                        frame.frame_index, d.instance_tag
                    )));
                }
            }
            previous = Some(frame.frame_index);
        }
        Ok(())
    }

    fn check_classes(&self, size: usize) -> Result<(), GraphError> {
        for frame in &self.frames {
            if let Some(d) = frame.instances.iter().find(|d| d.class_id >= size) {
                return Err(GraphError::UnknownClass {
                    vlog_id: self.vlog_id.clone(),
                    frame_index: frame.frame_index,
                    class_id: d.class_id,
                    size,
                });
            }
        }
        Ok(())
    }

    /// Total instances of each class over all frames.
    pub fn instance_totals(&self, size: usize) -> Result<Vec<u64>, GraphError> {
        self.check_classes(size)?;
        let mut totals = vec![0u64; size];
        for d in self.frames.iter().flat_map(|f| &f.instances) {
            totals[d.class_id] += 1;
        }
        Ok(totals)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceOptions {
    /// Count unordered pairs of same-class instances on the diagonal.
    pub same_class_pairs: bool,
}

impl Default for CooccurrenceOptions {
    fn default() -> Self {
        Self { same_class_pairs: true }
    }
}

/// Raw pair counts: cross-class entries add `k_i · k_j` per frame, the
/// diagonal adds `k_i (k_i − 1) / 2`.
pub fn build_cooccurrence(
    log: &DetectionLog,
    vocab: &ObjectVocabulary,
    options: CooccurrenceOptions,
) -> Result<Array2<u64>, GraphError> {
    let size = vocab.len();
    log.check_classes(size)?;
    let mut counts = Array2::<u64>::zeros((size, size));
    let mut per_class: Vec<(usize, u64)> = Vec::new();
    for frame in &log.frames {
        per_class.clear();
        let mut k = vec![0u64; size];
        for d in &frame.instances {
            k[d.class_id] += 1;
        }
        per_class.extend(k.iter().enumerate().filter(|(_, &n)| n > 0).map(|(c, &n)| (c, n)));
        for (a, &(ci, ki)) in per_class.iter().enumerate() {
            if options.same_class_pairs {
                counts[[ci, ci]] += ki * (ki - 1) / 2;
            }
            for &(cj, kj) in &per_class[a + 1..] {
                counts[[ci, cj]] += ki * kj;
                counts[[cj, ci]] += ki * kj;
            }
        }
    }
    Ok(counts)
}

/// Divides raw counts by the number of sampled frames.
pub fn normalize_adjacency(counts: &Array2<u64>, frame_count: u64) -> Result<Matrix, GraphError> {
    if frame_count == 0 {
        return Err(GraphError::EmptyVlog(String::new()));
    }
    let n = frame_count as f64;
    Ok(counts.mapv(|c| c as f64 / n))
}

/// One-hot node features: the `T×T` identity.
pub fn node_features(vocab: &ObjectVocabulary) -> Matrix {
    Matrix::eye(vocab.len())
}

#[derive(Clone, Debug, PartialEq)]
pub struct VlogGraph {
    pub vlog_id: String,
    pub adjacency: Matrix,
    pub features: Matrix,
}

impl VlogGraph {
    pub fn from_log(
        log: &DetectionLog,
        vocab: &ObjectVocabulary,
        options: CooccurrenceOptions,
    ) -> Result<Self, GraphError> {
        let counts = build_cooccurrence(log, vocab, options)?;
        let adjacency = normalize_adjacency(&counts, log.frame_count).map_err(|e| match e {
            GraphError::EmptyVlog(_) => GraphError::EmptyVlog(log.vlog_id.clone()),
            other => other,
        })?;
        Ok(Self {
            vlog_id: log.vlog_id.clone(),
            adjacency,
            features: node_features(vocab),
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Relabels nodes: row/column `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let t = self.node_count();
        assert_eq!(perm.len(), t, "permutation length");
        Self {
            vlog_id: self.vlog_id.clone(),
            adjacency: Matrix::from_shape_fn((t, t), |(i, j)| self.adjacency[[perm[i], perm[j]]]),
            features: Matrix::from_shape_fn((t, self.features.ncols()), |(i, j)| self.features[[perm[i], j]]),
        }
    }
}

/// Rejects adjacency matrices that are not square, symmetric and non-negative.
pub fn validate_adjacency(adjacency: &Matrix) -> Result<(), GraphError> {
    let (r, c) = adjacency.dim();
    if r != c {
        return Err(GraphError::InvalidAdjacency(format!("not square ({r}×{c})")));
    }
    for ((i, j), &v) in adjacency.indexed_iter() {
        if !v.is_finite() || v < 0.0 {
            return Err(GraphError::InvalidAdjacency(format!("entry ({i},{j}) = {v} is negative or non-finite")));
        }
        if j > i && adjacency[[j, i]] != v {
            return Err(GraphError::InvalidAdjacency(format!("asymmetric at ({i},{j})")));
        }
    }
    Ok(())
}
