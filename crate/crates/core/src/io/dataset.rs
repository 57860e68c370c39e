use std::path::{Path, PathBuf};

use super::detection_log::read_detection_log;
use super::embeddings::read_embeddings;
use super::graph_cache::read_graph_cache;
use super::manifest::{resolve, Manifest, ManifestEntry};
use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::graph::{CooccurrenceOptions, DetectionLog, ObjectVocabulary, VlogGraph};
use crate::par::{self, Execution};

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Directory of `<id>.graph.json` files; logs are parsed when `None`.
    pub graph_cache: Option<PathBuf>,
    pub cooccurrence: CooccurrenceOptions,
    pub execution: Execution,
}

fn single_row(path: &Path, dim: usize) -> Result<Vec<f64>> {
    let m = read_embeddings(path, Some(dim))?;
    if m.nrows() != 1 {
        return Err(Error::format(path, None, format!("expected exactly one vector, found {}", m.nrows())));
    }
    Ok(m.row(0).to_vec())
}

fn load_entry(
    manifest_path: &Path,
    manifest: &Manifest,
    vocab: &ObjectVocabulary,
    entry: &ManifestEntry,
    opts: &LoadOptions,
) -> Result<Sample> {
    let graph = match &opts.graph_cache {
        Some(dir) => {
            let path = dir.join(format!("{}.graph.json", entry.id));
            let cached = read_graph_cache(&path)?;
            if cached.vlog_id != entry.id {
                return Err(Error::format(&path, None, format!("cached graph is for '{}'", cached.vlog_id)));
            }
            cached.to_graph(vocab, opts.cooccurrence)?
        }
        None => {
            let log = read_entry_log(manifest_path, vocab, entry)?;
            VlogGraph::from_log(&log, vocab, opts.cooccurrence)?
        }
    };
    let visual_path = resolve(manifest_path, &entry.visual_embedding);
    let visual_frames = read_embeddings(&visual_path, Some(manifest.visual_dim))?;
    if visual_frames.nrows() == 0 {
        return Err(Error::format(&visual_path, None, "no visual frame vectors"));
    }
    let title = single_row(&resolve(manifest_path, &entry.title_embedding), manifest.text_dim)?;
    let description = entry
        .description_embedding
        .as_ref()
        .map(|p| single_row(&resolve(manifest_path, p), manifest.text_dim))
        .transpose()?;
    Ok(Sample {
        id: entry.id.clone(),
        label: entry.label,
        graph,
        visual_frames,
        title,
        description,
        duration_seconds: entry.duration_seconds,
    })
}

fn read_entry_log(manifest_path: &Path, vocab: &ObjectVocabulary, entry: &ManifestEntry) -> Result<DetectionLog> {
    let path = resolve(manifest_path, &entry.detection_log);
    let log = read_detection_log(&path, vocab)?;
    if log.vlog_id != entry.id {
        return Err(Error::format(&path, None, format!("log is for '{}', manifest entry is '{}'", log.vlog_id, entry.id)));
    }
    Ok(log)
}

/// Loads every manifest entry; files are read in parallel.
pub fn load_dataset(manifest_path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let manifest = Manifest::load(manifest_path)?;
    let vocab = manifest.vocabulary();
    let samples = par::try_map(&manifest.entries, opts.execution, |e| {
        load_entry(manifest_path, &manifest, &vocab, e, opts)
    })?;
    Ok(Dataset { vocabulary: vocab, visual_dim: manifest.visual_dim, text_dim: manifest.text_dim, samples })
}

/// Parses the detection log of every entry, in manifest order.
pub fn load_detection_logs(manifest_path: &Path, manifest: &Manifest, exec: Execution) -> Result<Vec<DetectionLog>> {
    let vocab = manifest.vocabulary();
    par::try_map(&manifest.entries, exec, |e| read_entry_log(manifest_path, &vocab, e))
}
