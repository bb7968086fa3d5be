//! Run configuration, read from TOML with kebab-case keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Mode, SubspaceSource, TimeGrid};
use crate::eigen::DENSE_PROPAGATION_CAP;
use crate::emulator::EmulatorConfig;
use crate::error::{Error, Result};
use crate::fock::ExcitationOperator;
use crate::spectrum::DEFAULT_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    #[default]
    None,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default = "defaults::t_max_long")]
    pub t_max_long: f64,
    #[serde(default = "defaults::dt_long")]
    pub dt_long: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub merge_subspaces: bool,
    #[serde(default)]
    pub subspace: SubspaceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "defaults::threshold")]
    pub threshold: f64,
    /// Peak-to-reference tolerance; defaults to `1.5 * pi / T`.
    #[serde(default)]
    pub match_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub fcidump: PathBuf,
    /// Excitation operator text, e.g. `+9.u -7.u`.
    pub excitation: String,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub reference: ReferenceKind,
    /// Largest matrix propagated by dense diagonalization; Krylov beyond.
    #[serde(default = "defaults::dense_cap")]
    pub dense_cap: usize,
    #[serde(default)]
    pub emulator: EmulatorConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

mod defaults {
    use std::path::PathBuf;

    pub fn t_max_long() -> f64 {
        1000.0
    }
    pub fn dt_long() -> f64 {
        0.1
    }
    pub fn threshold() -> f64 {
        super::DEFAULT_THRESHOLD
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn dense_cap() -> usize {
        super::DENSE_PROPAGATION_CAP
    }
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            t_max_long: defaults::t_max_long(),
            dt_long: defaults::dt_long(),
            mode: Mode::default(),
            merge_subspaces: false,
            subspace: SubspaceSource::default(),
        }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            threshold: defaults::threshold(),
            match_tol: None,
        }
    }
}

impl RunConfig {
    pub fn new(fcidump: impl Into<PathBuf>, excitation: impl Into<String>) -> Self {
        Self {
            fcidump: fcidump.into(),
            excitation: excitation.into(),
            output_dir: defaults::output_dir(),
            reference: ReferenceKind::default(),
            dense_cap: defaults::dense_cap(),
            emulator: EmulatorConfig::default(),
            dynamics: DynamicsConfig::default(),
            spectrum: SpectrumConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read a config file; relative paths inside it resolve against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            if cfg.fcidump.is_relative() {
                cfg.fcidump = dir.join(&cfg.fcidump);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.dynamics.t_max_long, self.dynamics.dt_long)
    }

    pub fn operator(&self) -> Result<ExcitationOperator> {
        self.excitation.parse()
    }

    pub fn match_tol(&self, grid: &TimeGrid) -> f64 {
        self.spectrum.match_tol.unwrap_or(1.5 * grid.resolution())
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !self.fcidump.is_file() {
            return Err(Error::Config(format!(
                "fcidump `{}` does not exist",
                self.fcidump.display()
            )));
        }
        self.operator()?;
        self.emulator.validate()?;
        self.grid()?;
        if !(self.spectrum.threshold >= 0.0) {
            return Err(Error::Config("threshold must be non-negative".into()));
        }
        if self.spectrum.match_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("match-tol must be positive".into()));
        }
        Ok(())
    }
}
