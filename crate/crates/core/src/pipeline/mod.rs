//! Measurement reduction: ringdown traces to loaded and intrinsic quality
//! factors, field and photon-number calibration, and cooldown subtraction
//! into sensitivity curves.

mod calibration;
mod decay;
mod reduce;
mod sensitivity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibration::{
    flux_trapping_ratio, onaxis_field, photon_number, q0_from_ql, stored_energy_from_transmitted,
};
pub use decay::{
    average_thermalized, ql_from_decay, DecayOptions, DecayReduction, QlPoint,
    ThermalizationCriterion,
};
pub use reduce::{field_bin, reduce_traces, ReductionOptions, TraceReport};
pub use sensitivity::{extract_sensitivity, MatchOptions};

/// Minimum number of samples in a decay trace.
pub const MIN_TRACE_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid decay trace `{label}`: {reason}")]
    InvalidTrace { label: String, reason: String },
    #[error("regression window {window} invalid for {samples} samples (need 3 ≤ window ≤ samples)")]
    Window { window: usize, samples: usize },
    #[error("no decaying window in trace `{0}`")]
    NoDecay(String),
    #[error("nonphysical coupling: Q_L = {q_l:e} ≥ Q_1 = {q1:e}")]
    NonphysicalCoupling { q_l: f64, q1: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("invalid dataset `{id}`: {reason}")]
    InvalidDataset { id: String, reason: String },
    #[error("reference cooldown `{id}` has trapped field {b:e} T inconsistent with zero (σ = {sigma:e} T)")]
    ReferenceNotFieldFree { id: String, b: f64, sigma: f64 },
    #[error("trapped field {b:e} T does not exceed its uncertainty {sigma:e} T; normalization is ill-conditioned")]
    IllConditionedNormalization { b: f64, sigma: f64 },
    #[error("no (T, E) points of `{flux}` match reference `{reference}`")]
    NoMatches { reference: String, flux: String },
    #[error("ratio undefined: denominator {value} is consistent with zero (σ = {sigma})")]
    UndefinedRatio { value: f64, sigma: f64 },
    #[error("no trace passed the thermalization criterion")]
    NoThermalizedTraces,
    #[error("traces do not overlap in time")]
    NoOverlap,
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// A value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// Zero-span record of transmitted power after the drive is switched off.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrace {
    /// `(time s, transmitted power W)`, times strictly increasing.
    samples: Vec<(f64, f64)>,
    pub f0: f64,
    pub temperature: f64,
    pub label: String,
    /// Uncertainty on `f0` (Hz); zero when unknown.
    pub f0_err: f64,
    /// Number of raw acquisitions averaged into this trace.
    pub n_averaged: usize,
}

impl DecayTrace {
    pub fn new(
        samples: Vec<(f64, f64)>,
        f0: f64,
        temperature: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        let invalid = |reason: String| PipelineError::InvalidTrace {
            label: label.clone(),
            reason,
        };
        if samples.len() < MIN_TRACE_SAMPLES {
            return Err(invalid(format!(
                "{} samples, need at least {MIN_TRACE_SAMPLES}",
                samples.len()
            )));
        }
        if !(f0.is_finite() && f0 > 0.0) {
            return Err(invalid(format!("f0 = {f0} Hz")));
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(invalid(format!("temperature = {temperature} K")));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(invalid(format!("time not strictly increasing at sample {}", i + 1)));
            }
        }
        if let Some(i) = samples
            .iter()
            .position(|&(t, p)| !t.is_finite() || !(p.is_finite() && p >= 0.0))
        {
            return Err(invalid(format!("non-finite time or negative power at sample {i}")));
        }
        Ok(Self {
            samples,
            f0,
            temperature,
            label,
            f0_err: 0.0,
            n_averaged: 1,
        })
    }

    pub fn with_f0_err(mut self, f0_err: f64) -> Self {
        self.f0_err = f0_err;
        self
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn omega(&self) -> f64 {
        crate::units::angular_frequency(self.f0)
    }
}

/// One reduced (T, E) operating point of a cooldown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub temperature_k: f64,
    pub field_v_per_m: f64,
    pub photon_n: f64,
    pub q0: f64,
    pub q0_err: f64,
    pub f0_hz: f64,
    pub f0_err: f64,
}

/// Intrinsic quality factor table for one cooldown.
#[derive(Debug, Clone, PartialEq)]
pub struct QDataset {
    pub cooldown_id: String,
    /// Trapped field (T), taken as the flux-gate reading above `T_c`.
    pub b_trap: Measured,
    rows: Vec<QRow>,
}

impl QDataset {
    /// Validates and sorts rows by temperature, then field.
    pub fn new(cooldown_id: impl Into<String>, b_trap: Measured, mut rows: Vec<QRow>) -> Result<Self> {
        let id = cooldown_id.into();
        let invalid = |reason: String| PipelineError::InvalidDataset {
            id: id.clone(),
            reason,
        };
        if !(b_trap.sigma.is_finite() && b_trap.sigma >= 0.0) || !b_trap.value.is_finite() {
            return Err(invalid(format!(
                "trapped field {} ± {} T",
                b_trap.value, b_trap.sigma
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.q0.is_finite() && r.q0 > 0.0) {
                return Err(invalid(format!("row {i}: Q0 = {}", r.q0)));
            }
            if !(r.q0_err >= 0.0 && r.f0_err >= 0.0) {
                return Err(invalid(format!("row {i}: negative uncertainty")));
            }
            if !(r.f0_hz.is_finite() && r.f0_hz > 0.0) {
                return Err(invalid(format!("row {i}: f0 = {}", r.f0_hz)));
            }
            if !(r.temperature_k.is_finite() && r.field_v_per_m.is_finite()) {
                return Err(invalid(format!("row {i}: non-finite temperature or field")));
            }
        }
        rows.sort_by(|a, b| {
            a.temperature_k
                .total_cmp(&b.temperature_k)
                .then(a.field_v_per_m.total_cmp(&b.field_v_per_m))
        });
        Ok(Self {
            cooldown_id: id,
            b_trap,
            rows,
        })
    }

    pub fn rows(&self) -> &[QRow] {
        &self.rows
    }
}

/// Which rows of the reference and flux datasets produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointSource {
    pub reference_row: usize,
    pub flux_row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityPoint {
    pub temperature_k: f64,
    pub field_v_per_m: f64,
    /// Resistive sensitivity (Ω/T).
    pub s: f64,
    pub s_err: f64,
    /// Reactive sensitivity (Ω/T).
    pub s_prime: f64,
    pub s_prime_err: f64,
    pub source: Option<PointSource>,
}

/// Sensitivity versus temperature and field for one flux cooldown.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCurve {
    pub cooldown_id: String,
    /// Trapped field (T) of the flux cooldown, when known.
    pub b_trap: Option<f64>,
    pub points: Vec<SensitivityPoint>,
}

impl SensitivityCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
