//! Optional TOML settings file. Every key is optional; command-line flags
//! override whatever the file sets. Relative paths in the file are taken
//! relative to the file's own directory.
//!
//! ```toml
//! out = "runs"
//! jobs = 1
//! seed = 7
//! data = "data"
//! weights = "runs/train-20240101T000000Z"
//! windows = [30.6, 60.6]
//!
//! [synth]
//! n_subjects = 20
//!
//! [train]
//! epochs = 200
//! batch_size = 32
//!
//! [eval]
//! pls = true
//!
//! [interpret]
//! mode = "first-layer"
//!
//! [bench]
//! iterations = 10000
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ppg_resp::data::{InputScaling, SynthConfig};
use ppg_resp::interpret::AttributionMode;
use ppg_resp::training::TrainConfig;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub windows: Option<Vec<f64>>,
    pub input_scaling: Option<InputScaling>,
    pub synth: Option<SynthConfig>,
    pub train: Option<TrainConfig>,
    pub eval: EvalSection,
    pub interpret: InterpretSection,
    pub bench: BenchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub pls: Option<bool>,
    pub pls_components: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpretSection {
    pub mode: Option<AttributionMode>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub iterations: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut config: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.out, &mut config.data, &mut config.weights].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

/// First of `flag`, `file`, `default` that is set.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn require_path(flag: Option<PathBuf>, file: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let path = flag
        .or(file)
        .ok_or_else(|| CliError::Config(format!("--{what} is required (or set `{what}` in the config file)")))?;
    if !path.exists() {
        return Err(CliError::Config(format!("{what} path {} does not exist", path.display())));
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_are_optional_and_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "data = \"d\"\nseed = 3\n[train]\nepochs = 7\n[interpret]\nmode = \"first-layer\"\n").unwrap();
        let c = FileConfig::load(&path).unwrap();
        assert_eq!(c.data.unwrap(), dir.path().join("d"));
        assert_eq!(c.seed, Some(3));
        let train = c.train.unwrap();
        assert_eq!(train.epochs, 7);
        assert_eq!(train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(c.interpret.mode, Some(AttributionMode::FirstLayer));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "epochs = 3\n").unwrap();
        assert!(matches!(FileConfig::load(&path), Err(CliError::Config(_))));
    }

    #[test]
    fn flags_win() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }
}
