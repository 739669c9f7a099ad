use std::fmt;
use std::path::{Path, PathBuf};

use cohsmix::inference::EmConfig;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::io::{ensure_dir, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Fit,
    SelectQ,
    Simulate,
    Grid,
}

impl Mode {
    fn reads_data(self) -> bool {
        matches!(self, Mode::Fit | Mode::SelectQ)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fit => "fit",
            Mode::SelectQ => "select-q",
            Mode::Simulate => "simulate",
            Mode::Grid => "grid",
        })
    }
}

/// Settings from the command line that replace `EmConfig` defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EmOverrides {
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
}

impl EmOverrides {
    pub fn apply(&self, base: EmConfig, seed: u64) -> EmConfig {
        EmConfig {
            n_restarts: self.restarts.unwrap_or(base.n_restarts),
            max_em_iters: self.max_iters.unwrap_or(base.max_em_iters),
            rng_seed: seed,
            ..base
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub mode: Mode,
    pub graph: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub overrides: EmOverrides,
    pub out: PathBuf,
    pub seed: u64,
}

impl RunManifest {
    pub fn em_config(&self) -> EmConfig {
        self.overrides.apply(EmConfig::default(), self.seed)
    }

    /// Checks input files exist for modes that read data and creates the
    /// output directory.
    pub fn validate(&self) -> Result<()> {
        if self.mode.reads_data() {
            let Some(graph) = &self.graph else {
                return Err(HarnessError::Usage(format!("{} needs --graph", self.mode)));
            };
            for path in std::iter::once(graph).chain(self.features.as_ref()) {
                if !path.is_file() {
                    return Err(HarnessError::io(
                        path,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                    ));
                }
            }
        }
        self.em_config().validate()?;
        ensure_dir(&self.out)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}
