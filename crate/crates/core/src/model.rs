//! Closed-form vortex impedance model.
//!
//! Trapped vortices are treated in the zero-creep (Gittleman-Rosenblum) limit
//! with Bardeen-Stephen flux-flow resistivity and a thermally activated
//! depinning frequency `ω_d(T) = ω₀·exp(α·T)`. The small-field expansion of
//! the two-penetration-depth surface impedance gives the complex sensitivity
//!
//! ```text
//! S + iS' = ρ_n / (2 λ_s(T) B_c2(T)) · (ω² + i F ω ω_d) / (ω² + ω_d²)
//! ```
//!
//! All functions are pure and operate on SI values.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{angular_frequency, MU0};

/// Temperatures at or above this fraction of `T_c` are rejected.
pub const TC_GUARD_FRACTION: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("temperature {t} K outside vortex-model domain [0, {limit} K)")]
    Temperature { t: f64, limit: f64 },
    #[error("trapped field {b_trap} T outside [0, B_c2(T) = {bc2} T]")]
    TrappedField { b_trap: f64, bc2: f64 },
    #[error("angular frequency must be positive and finite, got {0}")]
    Frequency(f64),
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Fixed niobium and cavity constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// Normal-state resistivity (Ω·m).
    pub rho_n: f64,
    /// Upper critical field at 0 K (T).
    pub bc2_0: f64,
    /// Critical temperature (K).
    pub tc: f64,
    /// London penetration depth at 0 K (m).
    pub lambda_l: f64,
    /// Geometry factor (Ω).
    pub g: f64,
    /// Resonant frequency (Hz).
    pub f0: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            rho_n: 4.0e-10,
            bc2_0: 0.2,
            tc: 9.2,
            lambda_l: 39.0e-9,
            g: 275.0,
            f0: 6.0e9,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rho_n", self.rho_n),
            ("bc2_0", self.bc2_0),
            ("tc", self.tc),
            ("lambda_l", self.lambda_l),
            ("g", self.g),
            ("f0", self.f0),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::Parameter {
                    name,
                    value,
                    reason: "must be strictly positive and finite",
                });
            }
        }
        Ok(())
    }

    /// Cavity angular frequency `2π f₀`.
    pub fn omega(&self) -> f64 {
        angular_frequency(self.f0)
    }

    /// Largest admissible temperature (exclusive).
    pub fn t_limit(&self) -> f64 {
        TC_GUARD_FRACTION * self.tc
    }
}

/// Vortex pinning parameters: `ω_d(T) = omega0·exp(alpha·T)` and the
/// reactive scale factor `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinningParams {
    #[serde(rename = "omega0_rad_s")]
    pub omega0: f64,
    #[serde(rename = "alpha_per_k")]
    pub alpha: f64,
    pub f: f64,
}

impl PinningParams {
    pub fn new(omega0: f64, alpha: f64, f: f64) -> Result<Self> {
        let p = Self { omega0, alpha, f };
        p.validate()?;
        Ok(p)
    }

    /// Shared depinning parameters from the published simultaneous fit,
    /// paired with the given reactive scale factor.
    pub fn published(f: f64) -> Self {
        Self {
            omega0: 2.22e10,
            alpha: 0.701,
            f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(ModelError::Parameter {
                name: "omega0",
                value: self.omega0,
                reason: "must be strictly positive and finite",
            });
        }
        if !self.alpha.is_finite() {
            return Err(ModelError::Parameter {
                name: "alpha",
                value: self.alpha,
                reason: "must be finite",
            });
        }
        if !(self.f.is_finite() && self.f >= 0.0) {
            return Err(ModelError::Parameter {
                name: "f",
                value: self.f,
                reason: "must be non-negative and finite",
            });
        }
        Ok(())
    }
}

/// Resistive and reactive sensitivity to trapped flux, in Ω/T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexSensitivity {
    pub s: f64,
    pub s_prime: f64,
}

impl ComplexSensitivity {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.s, self.s_prime)
    }
}

fn check_temperature(t: f64, mp: &MaterialParams) -> Result<()> {
    let limit = mp.t_limit();
    if !(t.is_finite() && t >= 0.0 && t < limit) {
        return Err(ModelError::Temperature { t, limit });
    }
    Ok(())
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(ModelError::Frequency(omega));
    }
    Ok(())
}

/// Upper critical field `B_c2(0)·(1 − (T/T_c)²)`.
pub fn bc2(t: f64, mp: &MaterialParams) -> Result<f64> {
    check_temperature(t, mp)?;
    let r = t / mp.tc;
    Ok(mp.bc2_0 * (1.0 - r * r))
}

/// Two-fluid condensate penetration depth `λ_L / √(1 − (T/T_c)⁴)`.
pub fn lambda_s(t: f64, mp: &MaterialParams) -> Result<f64> {
    check_temperature(t, mp)?;
    let r2 = (t / mp.tc).powi(2);
    Ok(mp.lambda_l / (1.0 - r2 * r2).sqrt())
}

/// Thermally activated depinning frequency `ω₀·exp(α·T)` in rad/s.
pub fn depinning_frequency(t: f64, pp: &PinningParams) -> f64 {
    pp.omega0 * (pp.alpha * t).exp()
}

/// Bardeen-Stephen flux-flow resistivity `ρ_n·B_trap / B_c2(T)`.
pub fn flux_flow_resistivity(t: f64, b_trap: f64, mp: &MaterialParams) -> Result<f64> {
    let bc2 = bc2(t, mp)?;
    if !(b_trap.is_finite() && (0.0..=bc2).contains(&b_trap)) {
        return Err(ModelError::TrappedField { b_trap, bc2 });
    }
    Ok(mp.rho_n * b_trap / bc2)
}

/// Gittleman-Rosenblum vortex resistivity `ρ_ff / (1 − i ω_d/ω)`.
pub fn gr_resistivity(
    t: f64,
    b_trap: f64,
    omega: f64,
    mp: &MaterialParams,
    pp: &PinningParams,
) -> Result<Complex64> {
    check_omega(omega)?;
    let rho_ff = flux_flow_resistivity(t, b_trap, mp)?;
    let x = depinning_frequency(t, pp) / omega;
    // ρ_ff (1 + i x) / (1 + x²), written out to keep the x → ∞ limit finite.
    let denom = 1.0 + x * x;
    Ok(Complex64::new(rho_ff / denom, rho_ff * x / denom))
}

/// Complex sensitivity `S + iS'` per unit trapped field (Ω/T).
///
/// `F` scales only the reactive numerator term; the resistive part is
/// independent of it.
pub fn sensitivity_model(
    t: f64,
    omega: f64,
    mp: &MaterialParams,
    pp: &PinningParams,
) -> Result<ComplexSensitivity> {
    check_omega(omega)?;
    let prefactor = mp.rho_n / (2.0 * lambda_s(t, mp)? * bc2(t, mp)?);
    let wd = depinning_frequency(t, pp);
    // Divide through by ω² so large ω_d cannot overflow.
    let x = wd / omega;
    let denom = 1.0 + x * x;
    Ok(ComplexSensitivity {
        s: prefactor / denom,
        s_prime: prefactor * pp.f * x / denom,
    })
}

/// Surface impedance `iωμ₀ (λ_s² + λ_v²)^{1/2}` with trapped vortices (Ω).
///
/// The vortex term is taken as `λ_v² = −i ρ_GR / (μ₀ ω)`, the sign for which
/// the principal root yields `Re Z ≥ 0` and whose first-order expansion in
/// `b_trap` is `b_trap·(S + iS')` at `F = 1`.
pub fn surface_impedance(
    t: f64,
    b_trap: f64,
    omega: f64,
    mp: &MaterialParams,
    pp: &PinningParams,
) -> Result<Complex64> {
    let rho = gr_resistivity(t, b_trap, omega, mp, pp)?;
    let ls = lambda_s(t, mp)?;
    let lambda_v_sq = -Complex64::i() * rho / (MU0 * omega);
    let root = (Complex64::new(ls * ls, 0.0) + lambda_v_sq).sqrt();
    Ok(Complex64::i() * omega * MU0 * root)
}

/// Rescales a sensitivity assuming `R_Fl ∝ √f₀`.
pub fn scale_sensitivity_frequency(s: f64, f_from: f64, f_to: f64) -> Result<f64> {
    for (name, value) in [("f_from", f_from), ("f_to", f_to)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(ModelError::Parameter {
                name,
                value,
                reason: "frequency must be positive",
            });
        }
    }
    Ok(s * (f_to / f_from).sqrt())
}

/// Upper bound on photon lifetime from combined oxide and vortex losses:
/// `T₁ = ω⁻¹ [1/Q_ox,0 + S·B_trap/G]⁻¹`.
///
/// `q_ox0 = None` models an oxide-free surface. With no loss at all the
/// result is `f64::INFINITY`.
pub fn t1_bound(q_ox0: Option<f64>, s: f64, b_trap: f64, mp: &MaterialParams) -> Result<f64> {
    if !(b_trap.is_finite() && b_trap >= 0.0) {
        return Err(ModelError::Parameter {
            name: "b_trap",
            value: b_trap,
            reason: "trapped field must be non-negative",
        });
    }
    if !(s.is_finite() && s >= 0.0) {
        return Err(ModelError::Parameter {
            name: "s",
            value: s,
            reason: "sensitivity must be non-negative",
        });
    }
    let oxide_loss = match q_ox0 {
        None => 0.0,
        Some(q) if q.is_infinite() && q > 0.0 => 0.0,
        Some(q) if q.is_finite() && q > 0.0 => 1.0 / q,
        Some(q) => {
            return Err(ModelError::Parameter {
                name: "q_ox0",
                value: q,
                reason: "oxide quality factor must be positive",
            })
        }
    };
    let loss = oxide_loss + s * b_trap / mp.g;
    if loss == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (mp.omega() * loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mg_to_tesla, nohm_per_mg_to_ohm_per_tesla, ohm_per_tesla_to_nohm_per_mg};

    fn mp() -> MaterialParams {
        MaterialParams::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn bc2_values() {
        assert_eq!(bc2(0.0, &mp()).unwrap(), 0.2);
        assert!(rel(bc2(1.5, &mp()).unwrap(), 0.194_685) < 1e-5);
        let near_tc = bc2(0.9985 * 9.2, &mp()).unwrap();
        assert!(near_tc > 0.0 && near_tc < 1e-3);
        assert!(bc2(1.0, &mp()).unwrap() > bc2(2.0, &mp()).unwrap());
    }

    #[test]
    fn bc2_rejects_normal_state() {
        assert!(matches!(
            bc2(9.2, &mp()),
            Err(ModelError::Temperature { .. })
        ));
        assert!(bc2(0.9995 * 9.2, &mp()).is_err());
        assert!(bc2(-0.1, &mp()).is_err());
        assert!(bc2(f64::NAN, &mp()).is_err());
    }

    #[test]
    fn lambda_s_values() {
        assert_eq!(lambda_s(0.0, &mp()).unwrap(), 39.0e-9);
        assert!(rel(lambda_s(1.3, &mp()).unwrap(), 39.0078e-9) < 2e-6);
        // 39/√(1 − 1/16)
        assert!(rel(lambda_s(4.6, &mp()).unwrap(), 40.2790e-9) < 2e-6);
        assert!(lambda_s(10.0, &mp()).is_err());
    }

    #[test]
    fn depinning_values() {
        let pp = PinningParams::published(1.0);
        assert_eq!(depinning_frequency(0.0, &pp), 2.22e10);
        assert!(rel(depinning_frequency(0.8, &pp), 3.890e10) < 5e-4);
        let flat = PinningParams { alpha: 0.0, ..pp };
        assert_eq!(depinning_frequency(1.2, &flat), 2.22e10);
    }

    #[test]
    fn flux_flow_values() {
        assert_eq!(flux_flow_resistivity(0.0, 0.0, &mp()).unwrap(), 0.0);
        assert!(rel(flux_flow_resistivity(0.0, 0.2, &mp()).unwrap(), 4e-10) < 1e-15);
        assert!(rel(flux_flow_resistivity(0.0, 1e-5, &mp()).unwrap(), 2e-14) < 1e-12);
        assert!(matches!(
            flux_flow_resistivity(0.0, 0.25, &mp()),
            Err(ModelError::TrappedField { .. })
        ));
        assert!(flux_flow_resistivity(0.0, -1e-6, &mp()).is_err());
        assert!(flux_flow_resistivity(9.5, 1e-6, &mp()).is_err());
    }

    #[test]
    fn gr_limits() {
        let m = mp();
        let b = 1e-5;
        let rho_ff = flux_flow_resistivity(0.0, b, &m).unwrap();
        let omega = m.omega();
        let at = |omega0: f64| {
            let pp = PinningParams { omega0, alpha: 0.0, f: 1.0 };
            gr_resistivity(0.0, b, omega, &m, &pp).unwrap()
        };
        // ω_d → 0: free flux flow
        let free = at(1e-30);
        assert!(rel(free.re, rho_ff) < 1e-15 && free.im.abs() < 1e-30);
        let half = at(omega);
        assert!(rel(half.re, rho_ff / 2.0) < 1e-14);
        assert!(rel(half.im, rho_ff / 2.0) < 1e-14);
        let three = at(3.0 * omega);
        assert!(rel(three.re, rho_ff / 10.0) < 1e-14);
        assert!(rel(three.im, 3.0 * rho_ff / 10.0) < 1e-14);
        assert!(at(1e6 * omega).norm() < 1e-5 * rho_ff);
        assert!(gr_resistivity(0.0, b, 0.0, &m, &PinningParams::published(1.0)).is_err());
    }

    #[test]
    fn low_temperature_sensitivity() {
        let m = mp();
        let pp = PinningParams::published(1.0);
        let s = sensitivity_model(0.01, m.omega(), &m, &pp).unwrap();
        assert!((ohm_per_tesla_to_nohm_per_mg(s.s) - 1.90).abs() < 0.01);
        let s15 = sensitivity_model(1.5, m.omega(), &m, &pp).unwrap();
        assert!((ohm_per_tesla_to_nohm_per_mg(s15.s) - 0.69).abs() < 0.01);
    }

    #[test]
    fn sensitivity_limits() {
        let m = mp();
        let omega = m.omega();
        let prefactor = m.rho_n / (2.0 * m.lambda_l * m.bc2_0);
        let free = sensitivity_model(0.0, omega, &m, &PinningParams { omega0: 1e-20, alpha: 0.0, f: 1.0 }).unwrap();
        assert!(rel(free.s, prefactor) < 1e-14);
        let pinned = sensitivity_model(0.0, omega, &m, &PinningParams { omega0: 1e300, alpha: 0.0, f: 1.0 }).unwrap();
        assert!(pinned.s < 1e-250 && pinned.s.is_finite());
        let no_f = sensitivity_model(0.5, omega, &m, &PinningParams::published(0.0)).unwrap();
        assert_eq!(no_f.s_prime, 0.0);
        assert!(no_f.s > 0.0);
    }

    #[test]
    fn bare_impedance_is_kinetic_inductance() {
        let m = mp();
        let z = surface_impedance(0.0, 0.0, m.omega(), &m, &PinningParams::published(1.0)).unwrap();
        assert_eq!(z.re, 0.0);
        assert!(rel(z.im, 1.847e-3) < 5e-4);
    }

    #[test]
    fn impedance_real_part_matches_resistive_sensitivity() {
        let m = mp();
        let pp = PinningParams::published(1.0);
        let b = 1e-5;
        let z = surface_impedance(0.01, b, m.omega(), &m, &pp).unwrap();
        let s = sensitivity_model(0.01, m.omega(), &m, &pp).unwrap();
        assert!(rel(z.re, s.s * b) < 1e-2);
        assert!(rel(z.re, 1.90e-7) < 1e-2);
    }

    #[test]
    fn impedance_real_part_grows_with_field() {
        let m = mp();
        let pp = PinningParams::published(1.0);
        let mut last = -1.0;
        for k in 0..=100 {
            let b = 1e-3 * k as f64 / 100.0;
            let re = surface_impedance(0.3, b, m.omega(), &m, &pp).unwrap().re;
            assert!(re > last);
            last = re;
        }
    }

    #[test]
    fn frequency_scaling() {
        let s = scale_sensitivity_frequency(0.7, 6e9, 1.3e9).unwrap();
        assert!((s - 0.326).abs() < 5e-4);
        assert_eq!(scale_sensitivity_frequency(0.42, 5e9, 5e9).unwrap(), 0.42);
        assert!((scale_sensitivity_frequency(1.0, 1e9, 4e9).unwrap() - 2.0).abs() < 1e-15);
        assert!(scale_sensitivity_frequency(1.0, 0.0, 4e9).is_err());
        assert!(scale_sensitivity_frequency(1.0, 1e9, -4e9).is_err());
    }

    #[test]
    fn t1_values() {
        let m = mp();
        let oxide_only = t1_bound(Some(9.42e8), 0.0, 0.0, &m).unwrap();
        assert!((oxide_only - 0.025).abs() < 1e-4);
        // G/(S·B)/ω with S = 1.9e-2 Ω/T and 10 mG.
        let t = t1_bound(None, 1.9e-2, mg_to_tesla(10.0), &m).unwrap();
        assert!(rel(t, 275.0 / (1.9e-2 * 1e-6) / m.omega()) < 1e-12);
        assert!((t - 0.3839).abs() < 1e-3);
        let s2 = nohm_per_mg_to_ohm_per_tesla(2.0);
        assert!((t1_bound(None, s2, 1e-6, &m).unwrap() - 0.365).abs() < 1e-3);
        assert!(t1_bound(None, s2, 0.0, &m).unwrap().is_infinite());
        assert!(t1_bound(None, s2, -1e-6, &m).is_err());
        assert!(t1_bound(Some(0.0), s2, 1e-6, &m).is_err());
    }

    #[test]
    fn t1_decreases_with_field() {
        let m = mp();
        let s = 1.9e-2;
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let t = t1_bound(Some(9.42e8), s, 1e-7 * k as f64, &m).unwrap();
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn material_validation() {
        assert!(mp().validate().is_ok());
        let bad = MaterialParams { g: 0.0, ..mp() };
        assert!(matches!(bad.validate(), Err(ModelError::Parameter { name: "g", .. })));
        assert!(PinningParams::new(-1.0, 0.1, 1.0).is_err());
        assert!(PinningParams::new(1.0, f64::NAN, 1.0).is_err());
    }
}
