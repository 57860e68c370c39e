use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_version, read_json, write_json};
use crate::error::{Error, Result};
use crate::graph::ObjectVocabulary;
use crate::task::Label;

/// One vlog. Paths are relative to the manifest's directory unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    pub detection_log: PathBuf,
    pub visual_embedding: PathBuf,
    pub title_embedding: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description_embedding: Option<PathBuf>,
    pub duration_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub vocabulary: Vec<String>,
    pub visual_dim: usize,
    pub text_dim: usize,
    pub entries: Vec<ManifestEntry>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl Manifest {
    pub fn validate(&self, path: &Path) -> Result<()> {
        check_version(path, None, self.format_version)?;
        let fail = |msg: String| Err(Error::format(path, None, msg));
        ObjectVocabulary::new(self.vocabulary.iter().cloned()).map_err(|e| Error::format(path, None, e.to_string()))?;
        if self.visual_dim == 0 || self.text_dim == 0 {
            return fail("embedding dimensions must be positive".into());
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !valid_id(&e.id) {
                return fail(format!("invalid vlog id '{}' (use letters, digits, '-', '_', '.')", e.id));
            }
            if !seen.insert(e.id.as_str()) {
                return fail(format!("duplicate vlog id '{}'", e.id));
            }
            if !(e.duration_seconds > 0.0 && e.duration_seconds.is_finite()) {
                return fail(format!("vlog '{}': duration must be positive, got {}", e.id, e.duration_seconds));
            }
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> ObjectVocabulary {
        ObjectVocabulary::new(self.vocabulary.iter().cloned()).expect("validated")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Manifest = read_json(path)?;
        m.validate(path)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate(path)?;
        write_json(path, self)
    }
}

/// Resolves `p` against the directory containing `manifest`.
pub(crate) fn resolve(manifest: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new("")).join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            label: Some(Label::Daily),
            detection_log: "logs/a.jsonl".into(),
            visual_embedding: "v.bin".into(),
            title_embedding: "t.bin".into(),
            description_embedding: None,
            duration_seconds: 10.0,
        }
    }

    fn manifest(entries: Vec<ManifestEntry>) -> Manifest {
        Manifest { format_version: 1, vocabulary: vec!["cup".into()], visual_dim: 2, text_dim: 2, entries }
    }

    #[test]
    fn round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        let m = manifest(vec![entry("a"), entry("b")]);
        m.save(&p).unwrap();
        assert_eq!(Manifest::load(&p).unwrap(), m);
        assert!(manifest(vec![entry("a"), entry("a")]).validate(&p).is_err());
        assert!(manifest(vec![entry("../x")]).validate(&p).is_err());
        let mut bad = entry("c");
        bad.duration_seconds = 0.0;
        assert!(manifest(vec![bad]).validate(&p).is_err());
    }

    #[test]
    fn unknown_fields_and_labels_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let text = r#"{"format_version":1,"vocabulary":["cup"],"visual_dim":2,"text_dim":2,"entries":[
            {"id":"a","label":"sad","detection_log":"l","visual_embedding":"v","title_embedding":"t","duration_seconds":1}]}"#;
        std::fs::write(&p, text).unwrap();
        assert!(Manifest::load(&p).is_err());
        std::fs::write(&p, text.replace("\"sad\"", "\"daily\"").replace("\"duration_seconds\"", "\"extra\":1,\"duration_seconds\"")).unwrap();
        assert!(Manifest::load(&p).is_err());
        std::fs::write(&p, text.replace("\"sad\"", "\"high-risk\"")).unwrap();
        assert_eq!(Manifest::load(&p).unwrap().entries[0].label, Some(Label::HighRisk));
    }

    #[test]
    fn relative_paths_follow_manifest() {
        assert_eq!(resolve(Path::new("/d/m.json"), Path::new("x/y")), PathBuf::from("/d/x/y"));
        assert_eq!(resolve(Path::new("/d/m.json"), Path::new("/abs")), PathBuf::from("/abs"));
    }
}
