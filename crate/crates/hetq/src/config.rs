//! TOML system and noise configuration files.
//!
//! The system file mirrors [`SystemConfig`] field for field. Every field is
//! required except `latency_target_ns`; `hetq default-config` prints a
//! complete file to start from.

use std::fs;
use std::path::Path;

use hetq_core::noise::ConfusionMatrix;
use hetq_core::{NoiseModel, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn parse_system_config(text: &str, origin: &Path) -> Result<SystemConfig> {
    let cfg: SystemConfig = toml::from_str(text).map_err(|e| Error::Config {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_system_config(path: impl AsRef<Path>) -> Result<SystemConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_system_config(&text, path)
}

pub fn system_config_toml(cfg: &SystemConfig) -> String {
    toml::to_string(cfg).expect("SystemConfig always serializes to TOML")
}

/// Read-noise description.
///
/// ```toml
/// mlc_bits = 3
/// p_minus = 0.01
/// p_plus = 0.01
/// seed = 42                # optional; --seed takes precedence
/// confusion = [[...], ...] # optional 2^mlc_bits rows
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFile {
    pub mlc_bits: u8,
    pub p_minus: f64,
    pub p_plus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Vec<Vec<f64>>>,
}

impl NoiseFile {
    pub fn into_model(self) -> Result<NoiseModel> {
        let model = NoiseModel::adjacent(self.mlc_bits, self.p_minus, self.p_plus, self.seed.unwrap_or(0))?;
        match self.confusion {
            Some(rows) => Ok(model.with_confusion(ConfusionMatrix::from_rows(&rows)?)?),
            None => Ok(model),
        }
    }
}

pub fn load_noise_model(path: impl AsRef<Path>) -> Result<NoiseModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: NoiseFile = toml::from_str(&text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = SystemConfig::default();
        let text = system_config_toml(&cfg);
        assert_eq!(parse_system_config(&text, Path::new("x")).unwrap(), cfg);
    }

    #[test]
    fn missing_field_is_a_config_error() {
        let text = system_config_toml(&SystemConfig::default());
        let cut: String = text
            .lines()
            .filter(|l| !l.starts_with("power_budget_mw"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = parse_system_config(&cut, Path::new("cfg.toml")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("power_budget_mw"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = system_config_toml(&SystemConfig::default()) + "power_budget = 1.0\n";
        assert!(parse_system_config(&text, Path::new("x")).is_err());
    }

    #[test]
    fn noise_file_with_matrix() {
        let text = r#"
mlc_bits = 2
p_minus = 0.0
p_plus = 0.0
confusion = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
"#;
        let file: NoiseFile = toml::from_str(text).unwrap();
        let m = file.into_model().unwrap();
        assert_eq!(m.confusion.unwrap().states(), 4);
        assert_eq!(m.seed, 0);
    }
}
