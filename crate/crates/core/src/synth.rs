//! Synthetic ground-truth data: decay traces, cooldown Q₀ tables and
//! sensitivity curves generated from known parameters with seeded
//! multiplicative Gaussian noise.
//!
//! Each generator draws from its own ChaCha8 stream (seed, stream id), so
//! adding a dataset never perturbs the noise of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{sensitivity_model, MaterialParams, ModelError, PinningParams};
use crate::pipeline::{
    photon_number, DecayTrace, Measured, PipelineError, QDataset, QRow, SensitivityCurve,
    SensitivityPoint,
};
use crate::units::angular_frequency;

/// Recorded in generated metadata so thresholds can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9) seed_from_u64 + set_stream; StandardNormal (rand_distr 0.5)";

const STREAM_CURVES: u64 = 1 << 32;
const STREAM_QDATA: u64 = 2 << 32;
const STREAM_DECAY: u64 = 3 << 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Relative (and optional additive) Gaussian noise per observable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub s_rel: f64,
    pub s_prime_rel: f64,
    pub q0_rel: f64,
    pub f0_shift_rel: f64,
    /// Additive floor on S (Ω/T).
    pub s_abs: f64,
    /// Additive floor on S' (Ω/T).
    pub s_prime_abs: f64,
}

impl NoiseModel {
    pub fn relative(rel: f64) -> Self {
        Self {
            s_rel: rel,
            s_prime_rel: rel,
            q0_rel: rel,
            f0_shift_rel: rel,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.s_rel,
            self.s_prime_rel,
            self.q0_rel,
            self.f0_shift_rel,
            self.s_abs,
            self.s_prime_abs,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SynthError::Spec("noise σ must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// One synthetic flux cooldown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDataset {
    pub cooldown_id: String,
    pub b_trap_tesla: f64,
    #[serde(default)]
    pub b_trap_err_tesla: f64,
    pub pinning: PinningParams,
}

/// Explicit temperatures or an inclusive linear grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemperatureGrid {
    List(Vec<f64>),
    Linear { min: f64, max: f64, n: usize },
}

impl TemperatureGrid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Self::List(v) => v.clone(),
            Self::Linear { min, max, n } => linspace(*min, *max, *n),
        }
    }
}

pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![min],
        _ => (0..n)
            .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Field-free reference Q₀(T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceQ {
    Constant(f64),
    /// `(temperature K, Q₀)` pairs, linearly interpolated and clamped at the
    /// ends.
    Table(Vec<(f64, f64)>),
}

impl ReferenceQ {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Self::Constant(q) => *q,
            Self::Table(rows) => {
                let hi = rows.partition_point(|r| r.0 < t);
                if hi == 0 {
                    return rows[0].1;
                }
                if hi == rows.len() {
                    return rows[rows.len() - 1].1;
                }
                let (t0, q0) = rows[hi - 1];
                let (t1, q1) = rows[hi];
                q0 + (q1 - q0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Constant(q) => q.is_finite() && *q > 0.0,
            Self::Table(rows) => {
                !rows.is_empty()
                    && rows.iter().all(|r| r.1.is_finite() && r.1 > 0.0)
                    && rows.windows(2).all(|w| w[1].0 > w[0].0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SynthError::Spec("reference Q0 must be positive with increasing temperatures".into()))
        }
    }
}

impl Default for ReferenceQ {
    fn default() -> Self {
        Self::Constant(5.0e9)
    }
}

/// Optional decay-trace generation for the reference cooldown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySpec {
    /// Initial transmitted power (W).
    pub p0_w: f64,
    pub samples: usize,
    /// Trace length in units of the power decay time `Q_L/ω`.
    pub decay_times: f64,
    pub noise_rel: f64,
    pub repeats: usize,
}

impl Default for DecaySpec {
    fn default() -> Self {
        Self {
            p0_w: 1e-14,
            samples: 400,
            decay_times: 5.0,
            noise_rel: 0.0,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default)]
    pub material: MaterialParams,
    pub datasets: Vec<SynthDataset>,
    pub temperatures_k: TemperatureGrid,
    #[serde(default = "default_fields")]
    pub fields_v_per_m: Vec<f64>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub reference_q0: ReferenceQ,
    #[serde(default = "default_reference_id")]
    pub reference_id: String,
    /// Antenna quality factor used for decay traces and photon numbers.
    #[serde(default = "default_q1")]
    pub q1: f64,
    /// On-axis field calibration (V/m)/√W used to assign photon numbers.
    #[serde(default = "default_cal")]
    pub calibration: f64,
    #[serde(default)]
    pub decay: Option<DecaySpec>,
    pub seed: u64,
}

fn default_fields() -> Vec<f64> {
    vec![50.0]
}
fn default_reference_id() -> String {
    "CD1".into()
}
fn default_q1() -> f64 {
    1.4e9
}
fn default_cal() -> f64 {
    1.0
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.noise.validate()?;
        self.reference_q0.validate()?;
        if self.datasets.is_empty() {
            return Err(SynthError::Spec("at least one dataset required".into()));
        }
        for d in &self.datasets {
            d.pinning.validate()?;
            if !(d.b_trap_tesla.is_finite() && d.b_trap_tesla >= 0.0 && d.b_trap_err_tesla >= 0.0) {
                return Err(SynthError::Spec(format!(
                    "dataset `{}`: trapped field must be non-negative",
                    d.cooldown_id
                )));
            }
        }
        let temps = self.temperatures_k.points();
        if temps.is_empty() {
            return Err(SynthError::Spec("empty temperature grid".into()));
        }
        for &t in &temps {
            crate::model::bc2(t, &self.material)?;
        }
        if self.fields_v_per_m.is_empty() || self.fields_v_per_m.iter().any(|e| !(*e > 0.0)) {
            return Err(SynthError::Spec("fields must be positive".into()));
        }
        if !(self.q1 > 0.0 && self.calibration > 0.0) {
            return Err(SynthError::Spec("q1 and calibration must be positive".into()));
        }
        Ok(())
    }

    fn photons_at(&self, field: f64) -> f64 {
        // U = P_T·Q₁/ω with P_T = (E/cal)²/Q₁.
        let u = (field / self.calibration).powi(2) / angular_frequency(self.material.f0);
        photon_number(u, self.material.f0)
    }
}

/// Exponential ringdown `P(t) = p0·exp(−ωt/q_l)·(1 + ε)`, `ε ~ N(0, noise_rel²)`.
pub fn generate_decay(
    q_l: f64,
    f0: f64,
    p0: f64,
    duration: f64,
    rate: f64,
    noise_rel: f64,
    seed: u64,
) -> Result<DecayTrace> {
    generate_piecewise_decay(&[(duration, q_l)], f0, p0, rate, noise_rel, seed)
}

/// Continuous ringdown whose loaded Q changes between consecutive segments
/// of `(duration s, Q_L)`.
pub fn generate_piecewise_decay(
    segments: &[(f64, f64)],
    f0: f64,
    p0: f64,
    rate: f64,
    noise_rel: f64,
    seed: u64,
) -> Result<DecayTrace> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !(positive(f0) && positive(p0) && positive(rate)) || !(noise_rel >= 0.0) {
        return Err(SynthError::Spec("f0, p0 and rate must be positive, noise ≥ 0".into()));
    }
    if segments.is_empty() || segments.iter().any(|&(d, q)| !positive(d) || !(q > 0.0)) {
        return Err(SynthError::Spec("segments need positive duration and Q_L".into()));
    }
    let omega = angular_frequency(f0);
    let total: f64 = segments.iter().map(|s| s.0).sum();
    let n = (total * rate).floor() as usize + 1;
    let mut r = rng(seed, STREAM_DECAY);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate;
        // Accumulated log-decay up to t.
        let mut remaining = t;
        let mut log_p = 0.0;
        for &(d, q) in segments {
            let dt = remaining.min(d);
            log_p -= omega * dt / q;
            remaining -= dt;
            if remaining <= 0.0 {
                break;
            }
        }
        if remaining > 0.0 {
            let q_last = segments[segments.len() - 1].1;
            log_p -= omega * remaining / q_last;
        }
        let eps = if noise_rel > 0.0 { noise_rel * normal(&mut r) } else { 0.0 };
        samples.push((t, (p0 * log_p.exp() * (1.0 + eps)).max(0.0)));
    }
    Ok(DecayTrace::new(samples, f0, 0.0, format!("synthetic seed={seed}"))?)
}

/// Sensitivity curves from the model, one per dataset, with σ columns set to
/// the noise standard deviation used.
pub fn generate_sensitivity_curves(spec: &SynthSpec) -> Result<Vec<SensitivityCurve>> {
    spec.validate()?;
    let omega = spec.material.omega();
    let temps = spec.temperatures_k.points();
    let nm = spec.noise;
    spec.datasets
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut r = rng(spec.seed, STREAM_CURVES + k as u64);
            let mut points = Vec::with_capacity(temps.len() * spec.fields_v_per_m.len());
            for &t in &temps {
                let m = sensitivity_model(t, omega, &spec.material, &d.pinning)?;
                for &e in &spec.fields_v_per_m {
                    let (z1, z2, z3, z4) = (normal(&mut r), normal(&mut r), normal(&mut r), normal(&mut r));
                    points.push(SensitivityPoint {
                        temperature_k: t,
                        field_v_per_m: e,
                        s: m.s * (1.0 + nm.s_rel * z1) + nm.s_abs * z2,
                        s_err: (nm.s_rel * m.s.abs()).hypot(nm.s_abs),
                        s_prime: m.s_prime * (1.0 + nm.s_prime_rel * z3) + nm.s_prime_abs * z4,
                        s_prime_err: (nm.s_prime_rel * m.s_prime.abs()).hypot(nm.s_prime_abs),
                        source: None,
                    });
                }
            }
            Ok(SensitivityCurve {
                cooldown_id: d.cooldown_id.clone(),
                b_trap: Some(d.b_trap_tesla),
                points,
            })
        })
        .collect()
}

/// A field-free reference cooldown and one flux cooldown per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthQData {
    pub reference: QDataset,
    pub flux: Vec<QDataset>,
}

/// Q₀ tables built by inverting the subtraction identities:
///
/// ```text
/// 1/Q₀,ₙ = 1/Q₀,₁ + S·B/G
/// f₀,ₙ   = f₀,₁ − S'·B·f₀,₁(0)/(2G)
/// ```
///
/// The reference frequency is the material `f0` at every temperature.
pub fn generate_qdatasets(spec: &SynthSpec) -> Result<SynthQData> {
    spec.validate()?;
    let mp = &spec.material;
    let omega = mp.omega();
    let temps = spec.temperatures_k.points();
    let nm = spec.noise;
    let f_ref = mp.f0;

    let mut ref_rng = rng(spec.seed, STREAM_QDATA);
    let mut ref_rows = Vec::new();
    let mut ref_true = Vec::new();
    for &t in &temps {
        let q_true = spec.reference_q0.at(t);
        for &e in &spec.fields_v_per_m {
            ref_true.push(q_true);
            ref_rows.push(QRow {
                temperature_k: t,
                field_v_per_m: e,
                photon_n: spec.photons_at(e),
                q0: q_true * (1.0 + nm.q0_rel * normal(&mut ref_rng)),
                q0_err: nm.q0_rel * q_true,
                f0_hz: f_ref,
                f0_err: 0.0,
            });
        }
    }
    let reference = QDataset::new(spec.reference_id.clone(), Measured::exact(0.0), ref_rows)?;

    let flux = spec
        .datasets
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut r = rng(spec.seed, STREAM_QDATA + 1 + k as u64);
            let b = d.b_trap_tesla;
            let mut rows = Vec::with_capacity(ref_true.len());
            let mut i = 0;
            for &t in &temps {
                let m = sensitivity_model(t, omega, mp, &d.pinning)?;
                for &e in &spec.fields_v_per_m {
                    let q_true = 1.0 / (1.0 / ref_true[i] + m.s * b / mp.g);
                    let shift = m.s_prime * b * f_ref / (2.0 * mp.g);
                    let (z1, z2) = (normal(&mut r), normal(&mut r));
                    rows.push(QRow {
                        temperature_k: t,
                        field_v_per_m: e,
                        photon_n: spec.photons_at(e),
                        q0: q_true * (1.0 + nm.q0_rel * z1),
                        q0_err: nm.q0_rel * q_true,
                        f0_hz: f_ref - shift * (1.0 + nm.f0_shift_rel * z2),
                        f0_err: nm.f0_shift_rel * shift.abs(),
                    });
                    i += 1;
                }
            }
            Ok(QDataset::new(
                d.cooldown_id.clone(),
                Measured::new(b, d.b_trap_err_tesla),
                rows,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SynthQData { reference, flux })
}

/// Reference-cooldown ringdowns: one trace (times `repeats`) per grid
/// temperature with `Q_L = (1/Q₀ + 1/Q₁)⁻¹`.
pub fn generate_reference_decays(spec: &SynthSpec) -> Result<Vec<DecayTrace>> {
    spec.validate()?;
    let ds = spec.decay.unwrap_or_default();
    if ds.samples < crate::pipeline::MIN_TRACE_SAMPLES || !(ds.decay_times > 0.0) || ds.repeats == 0 {
        return Err(SynthError::Spec("decay spec needs ≥ 8 samples, positive length, ≥ 1 repeat".into()));
    }
    let f0 = spec.material.f0;
    let omega = angular_frequency(f0);
    let mut out = Vec::new();
    for (i, &t) in spec.temperatures_k.points().iter().enumerate() {
        let q0 = spec.reference_q0.at(t);
        let q_l = 1.0 / (1.0 / q0 + 1.0 / spec.q1);
        let duration = ds.decay_times * q_l / omega;
        let rate = (ds.samples - 1) as f64 / duration;
        for rep in 0..ds.repeats {
            let seed = spec
                .seed
                .wrapping_add(((i as u64) << 16) | rep as u64);
            // Rate rounding can drop the final sample; regenerate exactly.
            let mut tr = generate_decay(q_l, f0, ds.p0_w, duration * (1.0 + 1e-12), rate, ds.noise_rel, seed)?;
            tr.temperature = t;
            tr.label = format!("{}_T{:.4}K_r{}", spec.reference_id, t, rep);
            out.push(tr);
        }
    }
    Ok(out)
}
