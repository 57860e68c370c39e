//! Cached co-occurrence counts, one JSON file per vlog.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_version, read_json, write_json, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::graph::{
    build_cooccurrence, node_features, normalize_adjacency, CooccurrenceOptions, DetectionLog, ObjectVocabulary,
    VlogGraph,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphCacheEntry {
    pub format_version: u32,
    pub vlog_id: String,
    pub frame_count: u64,
    pub options: CooccurrenceOptions,
    pub vocabulary: Vec<String>,
    /// Raw symmetric pair counts, row-major `T×T`.
    pub counts: Vec<Vec<u64>>,
}

impl GraphCacheEntry {
    pub fn from_log(log: &DetectionLog, vocab: &ObjectVocabulary, options: CooccurrenceOptions) -> Result<Self> {
        let counts = build_cooccurrence(log, vocab, options)?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            vlog_id: log.vlog_id.clone(),
            frame_count: log.frame_count,
            options,
            vocabulary: vocab.names().to_vec(),
            counts: counts.rows().into_iter().map(|r| r.to_vec()).collect(),
        })
    }

    /// Rebuilds the graph, checking the cache was made for `vocab` and `options`.
    pub fn to_graph(&self, vocab: &ObjectVocabulary, options: CooccurrenceOptions) -> Result<VlogGraph> {
        if self.vocabulary != vocab.names() {
            return Err(Error::Data(format!("graph cache for '{}' was built with a different vocabulary", self.vlog_id)));
        }
        if self.options != options {
            return Err(Error::Data(format!("graph cache for '{}' was built with different options", self.vlog_id)));
        }
        let t = vocab.len();
        if self.counts.len() != t || self.counts.iter().any(|r| r.len() != t) {
            return Err(Error::Data(format!("graph cache for '{}' is not {t}×{t}", self.vlog_id)));
        }
        let counts = Array2::from_shape_fn((t, t), |(i, j)| self.counts[i][j]);
        if counts != counts.t() {
            return Err(Error::Data(format!("graph cache for '{}' is not symmetric", self.vlog_id)));
        }
        Ok(VlogGraph {
            vlog_id: self.vlog_id.clone(),
            adjacency: normalize_adjacency(&counts, self.frame_count)?,
            features: node_features(vocab),
        })
    }
}

pub fn write_graph_cache(path: &Path, entry: &GraphCacheEntry) -> Result<()> {
    write_json(path, entry)
}

pub fn read_graph_cache(path: &Path) -> Result<GraphCacheEntry> {
    let entry: GraphCacheEntry = read_json(path)?;
    check_version(path, None, entry.format_version)?;
    Ok(entry)
}
