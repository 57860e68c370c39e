#![allow(dead_code)]

use mogam::autodiff::Matrix;
use mogam::dataset::Sample;
use mogam::fusion::FusionMode;
use mogam::gnn::{GnnConfig, GnnKind};
use mogam::graph::{Detection, DetectionLog, FrameDetections, VlogGraph};
use mogam::model::{Architecture, ModelSpec};
use mogam::task::{Label, Task};
use ndarray::array;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, shape: (usize, usize), lo: f64, hi: f64) -> Matrix {
    Matrix::from_shape_simple_fn(shape, || rng.random_range(lo..hi))
}

/// Symmetric non-negative adjacency with roughly `density` of pairs connected.
pub fn random_adjacency(rng: &mut ChaCha8Rng, t: usize, density: f64) -> Matrix {
    let mut a = Matrix::zeros((t, t));
    for i in 0..t {
        for j in i..t {
            if rng.random::<f64>() < density {
                let w = rng.random_range(0.05..2.0);
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
    }
    a
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Random log with at most `max_frames` stored frames of at most
/// `max_instances` detections each over `classes` classes.
pub fn random_log(rng: &mut ChaCha8Rng, classes: usize, max_frames: usize, max_instances: usize) -> DetectionLog {
    let frame_count = rng.random_range(1..=max_frames as u64 + 3);
    let stored = rng.random_range(0..=max_frames.min(frame_count as usize));
    let mut indices: Vec<u64> = (0..frame_count).collect();
    indices.shuffle(rng);
    indices.truncate(stored);
    indices.sort_unstable();
    let frames = indices
        .into_iter()
        .map(|frame_index| {
            let n = rng.random_range(0..=max_instances);
            let instances = (0..n)
                .map(|tag| Detection { class_id: rng.random_range(0..classes), instance_tag: tag as u32 })
                .collect();
            FrameDetections { frame_index, instances }
        })
        .collect();
    DetectionLog::new("log", frames, frame_count).expect("valid by construction")
}

/// Three-object vlog used by the small-model checks.
pub fn toy_sample(label: Label) -> Sample {
    Sample {
        id: "toy".into(),
        label: Some(label),
        graph: VlogGraph {
            vlog_id: "toy".into(),
            adjacency: array![[0.5, 1.0, 0.0], [1.0, 0.0, 0.25], [0.0, 0.25, 0.0]],
            features: Matrix::eye(3),
        },
        visual_frames: array![[0.3, -0.8, 1.1], [0.9, 0.2, -0.4]],
        title: vec![0.6, -1.2],
        description: Some(vec![-0.3, 0.7]),
        duration_seconds: 420.0,
    }
}

pub fn toy_spec(task: Task, architecture: Architecture, kind: GnnKind, fusion: FusionMode, d: usize) -> ModelSpec {
    ModelSpec {
        task,
        architecture,
        fusion,
        gnn: GnnConfig { kind, widths: vec![4, d], heads: 2, gat_edge_weights: false, unweighted_mean: false },
        vocab_size: 3,
        visual_dim: 3,
        text_dim: 2,
        dropout: 0.5,
    }
}
