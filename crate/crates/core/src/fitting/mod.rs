//! Simultaneous weighted least-squares fit of the vortex sensitivity model to
//! several sensitivity curves.
//!
//! By default `ω₀` and `α` are shared by every curve and `F` is free per
//! curve. Only the reactive residuals depend on `F`, so the resistive data
//! alone pin down `(ω₀, α)`.

mod layout;
mod lm;
mod problem;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, PinningParams};

pub use layout::ParamLayout;
pub use lm::{LeastSquares, LmOptions, LmOutcome, Termination};
pub use problem::{fit_simultaneous, jacobians_at, predict_curves, residual_vector, ModelPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("sensitivity curve `{0}` has no points")]
    EmptyCurve(String),
    #[error("curve `{curve}` point {point}: zero or invalid uncertainty with inverse-variance weighting")]
    ZeroSigma { curve: String, point: usize },
    #[error("rank-deficient normal matrix: {} not identifiable ({detail})", .parameters.join(", "))]
    RankDeficient {
        parameters: Vec<String>,
        detail: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite residual during fit")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, FitError>;

/// How a parameter is shared across datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharing {
    Global,
    PerDataset,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareMap {
    pub omega0: Sharing,
    pub alpha: Sharing,
    pub f: Sharing,
}

impl Default for ShareMap {
    fn default() -> Self {
        Self {
            omega0: Sharing::Global,
            alpha: Sharing::Global,
            f: Sharing::PerDataset,
        }
    }
}

/// A scalar applied to every dataset, or one value per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    PerDataset(Vec<f64>),
}

impl ParamValue {
    pub fn for_dataset(&self, k: usize, n: usize) -> Result<f64> {
        match self {
            Self::Scalar(v) => Ok(*v),
            Self::PerDataset(v) if v.len() == n => Ok(v[k]),
            Self::PerDataset(v) => Err(FitError::Config(format!(
                "{} per-dataset values for {n} datasets",
                v.len()
            ))),
        }
    }
}

/// Starting point. `omega0 = None` starts at the cavity angular frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialGuess {
    pub omega0: Option<ParamValue>,
    pub alpha: ParamValue,
    pub f: ParamValue,
}

impl Default for InitialGuess {
    fn default() -> Self {
        Self {
            omega0: None,
            alpha: ParamValue::Scalar(1.0),
            f: ParamValue::Scalar(100.0),
        }
    }
}

/// Closed interval `[lo, hi]` on the linear-scale value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.0 <= v && v <= self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    pub omega0: Interval,
    pub alpha: Interval,
    pub f: Interval,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            omega0: Interval(1.0e4, 1.0e16),
            alpha: Interval(-20.0, 20.0),
            f: Interval(1.0e-6, 1.0e8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Residuals divided by the point's σ.
    InverseVariance,
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub initial: InitialGuess,
    pub bounds: Bounds,
    pub share: ShareMap,
    pub weight: WeightMode,
    /// Relative parameter-step tolerance.
    pub xtol: f64,
    /// Gradient (cosine) tolerance.
    pub gtol: f64,
    /// Relative cost-reduction tolerance.
    pub ftol: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step.
    pub fd_step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            initial: InitialGuess::default(),
            bounds: Bounds::default(),
            share: ShareMap::default(),
            weight: WeightMode::InverseVariance,
            xtol: 1e-10,
            gtol: 1e-10,
            ftol: 1e-10,
            max_iterations: 500,
            fd_step: f64::EPSILON.sqrt(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("xtol", self.xtol),
            ("gtol", self.gtol),
            ("ftol", self.ftol),
            ("fd_step", self.fd_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(FitError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(FitError::Config("max_iterations must be at least 1".into()));
        }
        let b = &self.bounds;
        for (name, iv, log) in [("omega0", b.omega0, true), ("alpha", b.alpha, false), ("f", b.f, true)] {
            if !(iv.0 < iv.1) || (log && iv.0 < 0.0) || iv.0.is_nan() || iv.1.is_nan() {
                return Err(FitError::Config(format!(
                    "bounds for {name} [{}, {}] are empty or invalid",
                    iv.0, iv.1
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a simultaneous fit. Values and uncertainties are linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Names of the free parameters, e.g. `omega0`, `alpha`, `f[2]`.
    pub parameter_names: Vec<String>,
    pub values: Vec<f64>,
    /// `√diag(covariance)`.
    pub uncertainties: Vec<f64>,
    /// Covariance of the free parameters, `(JᵀWJ)⁻¹·χ²_red`, mapped to linear
    /// scale with the delta method.
    pub covariance: Vec<Vec<f64>>,
    /// Resolved parameters for each dataset, in input order.
    pub dataset_params: Vec<PinningParams>,
    /// 1σ on each dataset's resolved parameters; zero where fixed.
    pub dataset_uncertainties: Vec<PinningParams>,
    pub chi2_reduced: f64,
    pub n_points: usize,
    pub n_residuals: usize,
    /// Weighted residuals per dataset: S block then S' block.
    pub residuals: Vec<Vec<f64>>,
    pub n_iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Cost `Σr²` after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.parameter_names.iter().position(|n| n == name)?;
        Some((self.values[i], self.uncertainties[i]))
    }
}
