use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use canvas_core::harness::StudyConfig;
use serde::Serialize;

use crate::config::config_hash;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// `#`-prefixed lines shared by every CSV.
pub fn csv_header(what: &str, cfg: &StudyConfig) -> String {
    format!(
        "# canvas-lab {VERSION} {what}\n# config_sha256={}\n# seed={}\n",
        config_hash(cfg),
        cfg.seed
    )
}

/// Collects output files and the paths written.
pub struct Writer {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, data).with_context(|| format!("cannot write {}", p.display()))?;
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn csv(&mut self, name: &str, header: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut s = String::from(header);
        s.push_str(&columns.join(","));
        s.push('\n');
        for r in rows {
            writeln!(s, "{}", r.join(",")).unwrap();
        }
        self.bytes(name, s.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.bytes(name, s.as_bytes())
    }
}

/// Provenance of one invocation. Everything except `wall_clock_seconds` is a function of
/// the configuration.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub config_sha256: String,
    pub seed: u64,
    pub tool_version: &'static str,
    pub command: String,
    pub config: &'a StudyConfig,
    pub seeds: Seeds,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

/// How per-sample seeds derive from the base seed.
#[derive(Debug, Serialize)]
pub struct Seeds {
    pub base: u64,
    pub derivation: &'static str,
    pub samples: usize,
}

impl Seeds {
    pub fn of(cfg: &StudyConfig, samples: usize) -> Self {
        Self {
            base: cfg.seed,
            derivation: "derive_seed(base, sample_index)",
            samples,
        }
    }
}
