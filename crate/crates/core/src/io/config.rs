use std::path::Path;

use super::read_to_string;
use crate::error::{Error, Result};
use crate::train::TrainConfig;

/// Reads a TOML experiment file; missing keys keep their defaults and
/// unknown keys are rejected. `None` gives the defaults.
pub fn load_train_config(path: Option<&Path>) -> Result<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = read_to_string(path)?;
    let config: TrainConfig = toml::from_str(&text).map_err(|e| Error::format(path, None, e.to_string()))?;
    Ok(config)
}

pub fn train_config_toml(config: &TrainConfig) -> String {
    toml::to_string(config).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::GnnKind;
    use crate::task::Task;

    #[test]
    fn file_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(&p, "task = \"multiclass3\"\ngnn = \"gcn\"\nepochs = 7\n[split]\ntrain = 0.6\nval = 0.2\ntest = 0.2\n").unwrap();
        let c = load_train_config(Some(&p)).unwrap();
        assert_eq!(c.task, Task::Multiclass3);
        assert_eq!(c.gnn, GnnKind::Gcn);
        assert_eq!(c.epochs, 7);
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.split.val, 0.2);
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(&p, "epoch = 3\n").unwrap();
        assert!(load_train_config(Some(&p)).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = TrainConfig { seed: 9, lr: 3e-4, ..TrainConfig::default() };
        let back: TrainConfig = toml::from_str(&train_config_toml(&c)).unwrap();
        assert_eq!(back, c);
    }
}
