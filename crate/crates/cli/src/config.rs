use std::path::Path;

use anyhow::{bail, Context, Result};
use canvas_core::harness::{ConfigOverrides, StudyConfig, StudyKind};
use sha2::{Digest, Sha256};

/// Flag values layered over the file.
#[derive(Debug, Default, Clone)]
pub struct FlagOverrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub mu: Option<f64>,
    pub degree: Option<usize>,
}

pub fn read_overrides(path: &Path) -> Result<ConfigOverrides> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

/// Study defaults, then the file, then flags.
pub fn resolve(
    kind: Option<StudyKind>,
    file: Option<&ConfigOverrides>,
    flags: &FlagOverrides,
) -> Result<StudyConfig> {
    let mut cfg = kind.map(StudyConfig::for_study).unwrap_or_default();
    if let Some(o) = file {
        cfg.apply(o.clone());
    }
    cfg.apply(ConfigOverrides {
        seed: flags.seed,
        samples: flags.samples,
        mu: flags.mu,
        degree: flags.degree,
        ..Default::default()
    });
    if let Err(e) = cfg.validate() {
        bail!("invalid configuration: {e}");
    }
    Ok(cfg)
}

/// SHA-256 of the canonical JSON form of the resolved configuration.
pub fn config_hash(cfg: &StudyConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
