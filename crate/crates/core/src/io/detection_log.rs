//! Line-delimited JSON detection logs.
//!
//! ```text
//! {"format_version":1,"vlog_id":"v001","frame_count":10}
//! {"vlog_id":"v001","frame_index":0,"detections":[{"class_name":"cup","instance_tag":0}]}
//! ```
//!
//! The header comes first. Frames without detections are not stored.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{atomic_write, check_version, read_to_string, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::graph::{Detection, DetectionLog, FrameDetections, ObjectVocabulary};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    vlog_id: String,
    frame_count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    vlog_id: String,
    frame_index: u64,
    detections: Vec<DetectionLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionLine {
    class_name: String,
    instance_tag: u32,
}

pub fn format_detection_log(log: &DetectionLog, vocab: &ObjectVocabulary) -> Result<String> {
    log.validate()?;
    let mut out = serde_json::to_string(&Header {
        format_version: FORMAT_VERSION,
        vlog_id: log.vlog_id.clone(),
        frame_count: log.frame_count,
    })
    .expect("header serializes");
    out.push('\n');
    for frame in log.frames.iter().filter(|f| !f.instances.is_empty()) {
        let detections = frame
            .instances
            .iter()
            .map(|d| {
                let name = vocab.name(d.class_id).ok_or_else(|| {
                    Error::Data(format!(
                        "vlog '{}' frame {}: class id {} not in vocabulary",
                        log.vlog_id, frame.frame_index, d.class_id
                    ))
                })?;
                Ok(DetectionLine { class_name: name.to_string(), instance_tag: d.instance_tag })
            })
            .collect::<Result<Vec<_>>>()?;
        let line = FrameLine { vlog_id: log.vlog_id.clone(), frame_index: frame.frame_index, detections };
        out.push_str(&serde_json::to_string(&line).expect("frame serializes"));
        out.push('\n');
    }
    Ok(out)
}

/// Parses a log; `path` is only used in error messages.
pub fn parse_detection_log(text: &str, vocab: &ObjectVocabulary, path: &Path) -> Result<DetectionLog> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| Error::format(path, None, "missing header line"))?;
    let header: Header = serde_json::from_str(first)
        .map_err(|e| Error::format(path, Some(1), format!("missing or invalid header: {e}")))?;
    check_version(path, Some(1), header.format_version)?;

    let mut frames = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            return Err(Error::format(path, Some(n), "blank line"));
        }
        let frame: FrameLine = serde_json::from_str(line).map_err(|e| Error::format(path, Some(n), e.to_string()))?;
        if frame.vlog_id != header.vlog_id {
            return Err(Error::format(
                path,
                Some(n),
                format!("vlog_id '{}' differs from header '{}'", frame.vlog_id, header.vlog_id),
            ));
        }
        let instances = frame
            .detections
            .into_iter()
            .map(|d| match vocab.id(&d.class_name) {
                Some(class_id) => Ok(Detection { class_id, instance_tag: d.instance_tag }),
                None => Err(Error::format(path, Some(n), format!("unknown class '{}'", d.class_name))),
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(FrameDetections { frame_index: frame.frame_index, instances });
    }
    DetectionLog::new(header.vlog_id, frames, header.frame_count).map_err(|e| Error::format(path, None, e.to_string()))
}

pub fn read_detection_log(path: &Path, vocab: &ObjectVocabulary) -> Result<DetectionLog> {
    parse_detection_log(&read_to_string(path)?, vocab, path)
}

pub fn write_detection_log(path: &Path, log: &DetectionLog, vocab: &ObjectVocabulary) -> Result<()> {
    atomic_write(path, format_detection_log(log, vocab)?.as_bytes())
}
