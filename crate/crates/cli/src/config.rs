use std::path::{Path, PathBuf};

use fluxloss_core::fitting::FitConfig;
use fluxloss_core::io::read_json;
use fluxloss_core::model::MaterialParams;
use fluxloss_core::pipeline::{DecayOptions, MatchOptions, ReductionOptions, ThermalizationCriterion};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "FLUXLOSS_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub window: usize,
    pub noise_floor_w: f64,
    pub max_relative_drift: f64,
    pub q1: f64,
    /// (V/m)/√W
    pub calibration: f64,
    pub bins_per_decade: f64,
    pub temperature_tol_k: f64,
    pub interpolate: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let r = ReductionOptions::default();
        let m = MatchOptions::default();
        Self {
            window: r.decay.window,
            noise_floor_w: r.decay.noise_floor_w,
            max_relative_drift: r.thermalization.max_relative_drift,
            q1: r.q1,
            calibration: r.calibration,
            bins_per_decade: r.bins_per_decade,
            temperature_tol_k: m.temperature_tol_k,
            interpolate: m.interpolate,
        }
    }
}

impl PipelineConfig {
    pub fn reduction(&self) -> ReductionOptions {
        ReductionOptions {
            decay: DecayOptions {
                window: self.window,
                noise_floor_w: self.noise_floor_w,
            },
            thermalization: ThermalizationCriterion {
                max_relative_drift: self.max_relative_drift,
            },
            q1: self.q1,
            calibration: self.calibration,
            bins_per_decade: self.bins_per_decade,
        }
    }

    pub fn matching(&self) -> MatchOptions {
        MatchOptions {
            temperature_tol_k: self.temperature_tol_k,
            bins_per_decade: self.bins_per_decade,
            interpolate: self.interpolate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct T1Config {
    /// Oxide-limited quality factor at zero temperature.
    pub q_ox0: f64,
    /// Measured low-temperature sensitivity.
    pub s_nohm_per_mg: f64,
}

impl Default for T1Config {
    fn default() -> Self {
        Self {
            q_ox0: 9.42e8,
            s_nohm_per_mg: 2.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub pipeline: PipelineConfig,
    pub fit: FitConfig,
    pub t1: T1Config,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg: Self = match path {
            Some(p) => read_json(p).map_err(|e| CliError::Usage(e.to_string()))?,
            None => Self::default(),
        };
        cfg.material
            .validate()
            .map_err(|e| CliError::Usage(format!("config material: {e}")))?;
        cfg.fit
            .validate()
            .map_err(|e| CliError::Usage(format!("config fit: {e}")))?;
        Ok(cfg)
    }

    /// The environment variable wins over the config file.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Relative output paths are placed under the output directory, whose
    /// parents are created on demand.
    pub fn resolve_output(&self, out: &Path) -> Result<PathBuf, CliError> {
        let path = if out.is_absolute() {
            out.to_path_buf()
        } else {
            self.output_dir().join(out)
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
            }
        }
        Ok(path)
    }
}
