//! In-memory samples assembled from detection logs, embeddings and metadata.

use crate::autodiff::Matrix;
use crate::graph::{ObjectVocabulary, VlogGraph};
use crate::task::{Label, Task};

/// One vlog with every modality loaded.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: Option<Label>,
    pub graph: VlogGraph,
    /// Per-frame visual vectors, `frames × D_v`.
    pub visual_frames: Matrix,
    pub title: Vec<f64>,
    /// `None` when the vlog had no description; treated as a zero vector.
    pub description: Option<Vec<f64>>,
    pub duration_seconds: f64,
}

impl Sample {
    pub fn description_missing(&self) -> bool {
        self.description.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub vocabulary: ObjectVocabulary,
    pub visual_dim: usize,
    pub text_dim: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Samples whose label belongs to `task`, in original order.
    pub fn for_task(&self, task: Task) -> Vec<&Sample> {
        self.samples
            .iter()
            .filter(|s| s.label.is_some_and(|l| task.class_index(l).is_some()))
            .collect()
    }
}
