//! Seeded synthetic vlogs with class-dependent objects, embeddings and durations.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::detection_log::write_detection_log;
use super::embeddings::{write_embeddings, EmbeddingEncoding};
use super::manifest::{Manifest, ManifestEntry};
use super::{atomic_write, FORMAT_VERSION};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::{Detection, DetectionLog, FrameDetections, ObjectVocabulary, COCO_CLASSES};
use crate::par::{self, Execution};
use crate::task::Label;

const CURATED: [&str; 20] = [
    "person", "cup", "fork", "knife", "bowl", "cake", "sandwich", "banana", "apple", "wine glass", "bed",
    "cell phone", "laptop", "tv", "couch", "handbag", "vase", "book", "chair", "spoon",
];

const MEANS_STREAM: u64 = 3;
const VLOG_STREAM_BASE: u64 = 1 << 32;

/// The first `size` classes of a COCO ordering that starts with the objects
/// the generator gives class-dependent rates.
pub fn curated_vocabulary(size: usize) -> Result<ObjectVocabulary> {
    if size == 0 || size > COCO_CLASSES.len() {
        return Err(Error::Config(format!("vocabulary size must be in 1..=80, got {size}")));
    }
    let rest = COCO_CLASSES.iter().filter(|c| !CURATED.contains(c));
    let names: Vec<&str> = CURATED.iter().chain(rest).take(size).copied().collect();
    Ok(ObjectVocabulary::new(names)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticMode {
    /// Every modality follows the vlog's class.
    #[default]
    Separable,
    /// Each vlog carries its class in either the objects or the metadata
    /// (coin flip); the other modality and the visual frames are drawn from
    /// the class-averaged distribution.
    Complementary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub vlogs_per_class: usize,
    pub vocab_size: usize,
    pub min_frames: u64,
    pub max_frames: u64,
    pub visual_dim: usize,
    pub text_dim: usize,
    /// Visual vectors stored per vlog (at most one per frame).
    pub visual_frames: usize,
    /// Norm of each class's embedding mean.
    pub embedding_separation: f64,
    /// Standard deviation of per-dimension embedding noise.
    pub noise: f64,
    /// 0 gives every class the averaged object rates, 1 the themed rates.
    pub object_contrast: f64,
    /// Per-frame occurrence probability of each object, one row per class in
    /// daily, depression, high-risk order. Replaces the themed rates.
    pub object_probabilities: Option<Vec<Vec<f64>>>,
    /// Mean durations in seconds, same class order.
    pub mean_durations: [f64; 3],
    /// Log-space standard deviation of durations.
    pub duration_sigma: f64,
    pub missing_description_rate: f64,
    /// Probability that a present object has two instances instead of one.
    pub second_instance_rate: f64,
    pub mode: SyntheticMode,
    pub encoding: EmbeddingEncoding,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            vlogs_per_class: 150,
            vocab_size: 20,
            min_frames: 20,
            max_frames: 60,
            visual_dim: 16,
            text_dim: 16,
            visual_frames: 8,
            embedding_separation: 2.0,
            noise: 1.0,
            object_contrast: 1.0,
            object_probabilities: None,
            mean_durations: [903.39, 416.03, 515.74],
            duration_sigma: 0.6,
            missing_description_rate: 0.1,
            second_instance_rate: 0.25,
            mode: SyntheticMode::Separable,
            encoding: EmbeddingEncoding::Binary,
            seed: 0,
        }
    }
}

fn themed_rate(label: Label, name: &str) -> f64 {
    let food = ["cup", "fork", "knife", "bowl", "cake", "sandwich", "banana", "apple", "wine glass", "spoon"];
    match (label, name) {
        (Label::Daily, "person") => 0.6,
        (Label::Depression, "person") => 0.5,
        (Label::HighRisk, "person") => 0.55,
        (Label::Daily, n) if food.contains(&n) => 0.2,
        (Label::Depression, "cup") => 0.12,
        (Label::Depression, n) if food.contains(&n) => 0.04,
        (Label::HighRisk, "fork") => 0.18,
        (Label::HighRisk, "cup") => 0.1,
        (Label::HighRisk, n) if food.contains(&n) => 0.06,
        (Label::Daily, "handbag") => 0.15,
        (Label::Daily, "vase" | "cell phone" | "chair") => 0.1,
        (Label::Daily, "laptop") => 0.08,
        (Label::Daily, _) => 0.05,
        (Label::Depression, "bed") => 0.25,
        (Label::Depression, "cell phone") => 0.2,
        (Label::Depression, "laptop" | "tv" | "couch") => 0.15,
        (Label::Depression, "book" | "chair") => 0.08,
        (Label::Depression, "handbag") => 0.04,
        (Label::Depression, "vase") => 0.03,
        (Label::HighRisk, "cell phone") => 0.22,
        (Label::HighRisk, "bed") => 0.18,
        (Label::HighRisk, "book") => 0.15,
        (Label::HighRisk, "chair") => 0.12,
        (Label::HighRisk, "laptop" | "tv" | "couch") => 0.1,
        (Label::HighRisk, "handbag") => 0.06,
        (Label::HighRisk, "vase") => 0.04,
        _ => 0.02,
    }
}

fn class_index(label: Label) -> usize {
    Label::ALL.iter().position(|&l| l == label).expect("closed set")
}

/// Generator parameters after applying defaults and contrast.
#[derive(Clone, Debug, PartialEq)]
struct Resolved {
    probabilities: [Vec<f64>; 3],
    neutral_probabilities: Vec<f64>,
    visual_means: [Vec<f64>; 3],
    text_means: [Vec<f64>; 3],
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.vlogs_per_class == 0 {
            return fail("vlogs_per_class must be at least 1".into());
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return fail(format!("need 1 <= min_frames <= max_frames, got {}..{}", self.min_frames, self.max_frames));
        }
        if self.visual_dim == 0 || self.text_dim == 0 || self.visual_frames == 0 {
            return fail("embedding sizes and visual_frames must be positive".into());
        }
        for (what, p) in [
            ("object_contrast", self.object_contrast),
            ("missing_description_rate", self.missing_description_rate),
            ("second_instance_rate", self.second_instance_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{what} must be in [0, 1], got {p}"));
            }
        }
        if !(self.noise >= 0.0 && self.embedding_separation >= 0.0 && self.duration_sigma >= 0.0) {
            return fail("noise, separation and duration_sigma must be non-negative".into());
        }
        if self.mean_durations.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return fail("mean durations must be positive".into());
        }
        if let Some(rows) = &self.object_probabilities {
            if rows.len() != 3 || rows.iter().any(|r| r.len() != self.vocab_size) {
                return fail(format!("object_probabilities must be 3 rows of {} values", self.vocab_size));
            }
            if rows.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                return fail("object probabilities must be in [0, 1]".into());
            }
        }
        curated_vocabulary(self.vocab_size)?;
        Ok(())
    }

    fn resolve(&self, vocab: &ObjectVocabulary) -> Resolved {
        let themed: Vec<Vec<f64>> = match &self.object_probabilities {
            Some(rows) => rows.clone(),
            None => Label::ALL.iter().map(|&l| vocab.names().iter().map(|n| themed_rate(l, n)).collect()).collect(),
        };
        let t = vocab.len();
        let neutral: Vec<f64> = (0..t).map(|j| themed.iter().map(|r| r[j]).sum::<f64>() / 3.0).collect();
        let contrast = |r: &Vec<f64>| -> Vec<f64> {
            r.iter().zip(&neutral).map(|(p, n)| n + self.object_contrast * (p - n)).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(MEANS_STREAM);
        let mut direction = |dim: usize| -> Vec<f64> {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| self.embedding_separation * x / norm).collect()
        };
        let visual_means = [direction(self.visual_dim), direction(self.visual_dim), direction(self.visual_dim)];
        let text_means = [direction(self.text_dim), direction(self.text_dim), direction(self.text_dim)];
        Resolved {
            probabilities: [contrast(&themed[0]), contrast(&themed[1]), contrast(&themed[2])],
            neutral_probabilities: neutral,
            visual_means,
            text_means,
        }
    }
}

fn average(vs: &[Vec<f64>; 3]) -> Vec<f64> {
    (0..vs[0].len()).map(|j| vs.iter().map(|v| v[j]).sum::<f64>() / 3.0).collect()
}

struct Vlog {
    entry: ManifestEntry,
    log: DetectionLog,
    visual: Matrix,
    title: Matrix,
    description: Option<Matrix>,
}

fn noisy(rng: &mut ChaCha8Rng, mean: &[f64], noise: f64) -> Vec<f64> {
    mean.iter().map(|m| m + noise * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn generate_vlog(cfg: &SyntheticConfig, res: &Resolved, index: usize, label: Label, ordinal: usize) -> Result<Vlog> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(VLOG_STREAM_BASE + index as u64);
    let c = class_index(label);
    let (graph_informative, meta_informative) = match cfg.mode {
        SyntheticMode::Separable => (true, true),
        SyntheticMode::Complementary => {
            let g = rng.random_bool(0.5);
            (g, !g)
        }
    };
    let id = format!("{}-{:04}", label.key(), ordinal);

    let probs = if graph_informative { &res.probabilities[c] } else { &res.neutral_probabilities };
    let frame_count = rng.random_range(cfg.min_frames..=cfg.max_frames);
    let mut frames = Vec::new();
    for f in 0..frame_count {
        let mut instances = Vec::new();
        for (class_id, &p) in probs.iter().enumerate() {
            if rng.random_bool(p) {
                let k = if rng.random_bool(cfg.second_instance_rate) { 2 } else { 1 };
                for _ in 0..k {
                    instances.push(Detection { class_id, instance_tag: instances.len() as u32 });
                }
            }
        }
        if !instances.is_empty() {
            frames.push(FrameDetections { frame_index: f, instances });
        }
    }
    let log = DetectionLog::new(id.clone(), frames, frame_count)?;

    let visual_mean =
        if cfg.mode == SyntheticMode::Separable { res.visual_means[c].clone() } else { average(&res.visual_means) };
    let rows = cfg.visual_frames.min(frame_count as usize);
    let mut visual = Vec::with_capacity(rows * cfg.visual_dim);
    for _ in 0..rows {
        visual.extend(noisy(&mut rng, &visual_mean, cfg.noise));
    }
    let visual = Matrix::from_shape_vec((rows, cfg.visual_dim), visual).expect("shape");

    let text_mean = if meta_informative { res.text_means[c].clone() } else { average(&res.text_means) };
    let title = Matrix::from_shape_vec((1, cfg.text_dim), noisy(&mut rng, &text_mean, cfg.noise)).expect("shape");
    let description_present = !rng.random_bool(cfg.missing_description_rate);
    let description_row = Matrix::from_shape_vec((1, cfg.text_dim), noisy(&mut rng, &text_mean, cfg.noise))
        .expect("shape");
    let description = description_present.then_some(description_row);

    let target = if meta_informative { cfg.mean_durations[c] } else { cfg.mean_durations.iter().sum::<f64>() / 3.0 };
    let sigma = cfg.duration_sigma;
    let duration = if sigma == 0.0 {
        target
    } else {
        LogNormal::new(target.ln() - sigma * sigma / 2.0, sigma)
            .map_err(|e| Error::Config(e.to_string()))?
            .sample(&mut rng)
    };

    let entry = ManifestEntry {
        id: id.clone(),
        label: Some(label),
        detection_log: PathBuf::from(format!("logs/{id}.jsonl")),
        visual_embedding: PathBuf::from(format!("visual/{id}.emb")),
        title_embedding: PathBuf::from(format!("text/{id}.title.emb")),
        description_embedding: description.as_ref().map(|_| PathBuf::from(format!("text/{id}.desc.emb"))),
        duration_seconds: duration,
    };
    Ok(Vlog { entry, log, visual, title, description })
}

/// Writes a complete synthetic dataset under `out` and returns its manifest
/// (saved as `out/manifest.json`).
pub fn generate_synthetic(cfg: &SyntheticConfig, out: &Path, exec: Execution) -> Result<Manifest> {
    cfg.validate()?;
    let vocab = curated_vocabulary(cfg.vocab_size)?;
    let res = cfg.resolve(&vocab);
    let jobs: Vec<(usize, Label, usize)> = Label::ALL
        .iter()
        .enumerate()
        .flat_map(|(c, &l)| (0..cfg.vlogs_per_class).map(move |i| (c * cfg.vlogs_per_class + i, l, i + 1)))
        .collect();
    let entries = par::try_map(&jobs, exec, |&(index, label, ordinal)| {
        let v = generate_vlog(cfg, &res, index, label, ordinal)?;
        write_detection_log(&out.join(&v.entry.detection_log), &v.log, &vocab)?;
        write_embeddings(&out.join(&v.entry.visual_embedding), &v.visual, cfg.encoding)?;
        write_embeddings(&out.join(&v.entry.title_embedding), &v.title, cfg.encoding)?;
        if let (Some(p), Some(d)) = (&v.entry.description_embedding, &v.description) {
            write_embeddings(&out.join(p), d, cfg.encoding)?;
        }
        Ok::<_, Error>(v.entry)
    })?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        vocabulary: vocab.names().to_vec(),
        visual_dim: cfg.visual_dim,
        text_dim: cfg.text_dim,
        entries,
    };
    let echo = toml::to_string(cfg).expect("config serializes");
    atomic_write(&out.join("synthetic.toml"), echo.as_bytes())?;
    manifest.save(&out.join("manifest.json"))?;
    Ok(manifest)
}
