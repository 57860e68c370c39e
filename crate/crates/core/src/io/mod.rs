//! On-disk formats, dataset ingestion, synthetic data and run configuration.

mod config;
mod dataset;
mod detection_log;
mod embeddings;
mod graph_cache;
mod manifest;
mod synthetic;

pub use config::{load_train_config, train_config_toml};
pub use dataset::{load_dataset, load_detection_logs, LoadOptions};
pub use detection_log::{format_detection_log, parse_detection_log, read_detection_log, write_detection_log};
pub use embeddings::{
    decode_embeddings, encode_embeddings_binary, encode_embeddings_text, read_embeddings, write_embeddings,
    EmbeddingEncoding,
};
pub use graph_cache::{read_graph_cache, write_graph_cache, GraphCacheEntry};
pub use manifest::{Manifest, ManifestEntry};
pub use synthetic::{curated_vocabulary, generate_synthetic, SyntheticConfig, SyntheticMode};

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Current version written into every file this crate produces.
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn check_version(path: &Path, line: Option<usize>, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::format(path, line, format!("unsupported format_version {version}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

/// Writes `bytes` to a temporary file in the same directory, then renames it
/// over `path`, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, None, e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, Some(e.line()), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
