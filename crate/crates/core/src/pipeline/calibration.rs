use super::{Measured, PipelineError, Result};
use crate::units::{angular_frequency, HBAR};

/// Intrinsic quality factor from loaded and coupling quality factors,
/// `Q₀ = (1/Q_L − 1/Q₁)⁻¹`. An infinite `q1` returns `q_l`.
pub fn q0_from_ql(q_l: f64, q1: f64) -> Result<f64> {
    if !(q_l.is_finite() && q_l > 0.0) || q1.is_nan() || q_l >= q1 {
        return Err(PipelineError::NonphysicalCoupling { q_l, q1 });
    }
    if q1.is_infinite() {
        return Ok(q_l);
    }
    Ok(1.0 / (1.0 / q_l - 1.0 / q1))
}

/// On-axis field `E = cal·√(P_T·Q₁)` (V/m).
pub fn onaxis_field(p_t: f64, q1: f64, cal: f64) -> Result<f64> {
    if !(p_t >= 0.0) {
        return Err(PipelineError::Negative {
            name: "transmitted power",
            value: p_t,
        });
    }
    Ok(cal * (p_t * q1).sqrt())
}

/// Stored energy radiated through the pickup antenna, `U = P_T·Q₁/ω`.
pub fn stored_energy_from_transmitted(p_t: f64, q1: f64, f0: f64) -> Result<f64> {
    if !(p_t >= 0.0) {
        return Err(PipelineError::Negative {
            name: "transmitted power",
            value: p_t,
        });
    }
    Ok(p_t * q1 / angular_frequency(f0))
}

/// Intracavity photon number `n = U/ħω`.
pub fn photon_number(u: f64, f0: f64) -> f64 {
    u / (HBAR * angular_frequency(f0))
}

/// Ratio `B_SC/B_NC` with first-order propagated uncertainty.
pub fn flux_trapping_ratio(b_nc: Measured, b_sc: Measured) -> Result<Measured> {
    if b_nc.value == 0.0 || b_nc.value.abs() < b_nc.sigma {
        return Err(PipelineError::UndefinedRatio {
            value: b_nc.value,
            sigma: b_nc.sigma,
        });
    }
    let ratio = b_sc.value / b_nc.value;
    let rel_nc = b_nc.sigma / b_nc.value;
    // σ_r² = (σ_sc/B_nc)² + (r·σ_nc/B_nc)²; stays finite when B_sc = 0.
    let sigma = ((b_sc.sigma / b_nc.value).powi(2) + (ratio * rel_nc).powi(2)).sqrt();
    Ok(Measured::new(ratio, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q0_examples() {
        let q0 = q0_from_ql(7e8, 1.4e9).unwrap();
        assert!(((q0 - 1.4e9) / 1.4e9).abs() < 1e-14);
        assert_eq!(q0_from_ql(3e9, f64::INFINITY).unwrap(), 3e9);
        assert!(matches!(
            q0_from_ql(1.4e9, 1.4e9),
            Err(PipelineError::NonphysicalCoupling { .. })
        ));
        assert!(q0_from_ql(2e9, 1.4e9).is_err());
        assert!(q0_from_ql(0.0, 1.4e9).is_err());
    }

    #[test]
    fn field_examples() {
        assert_eq!(onaxis_field(0.0, 1.4e9, 1.0).unwrap(), 0.0);
        let e1 = onaxis_field(1e-15, 1.4e9, 2.5).unwrap();
        let e4 = onaxis_field(4e-15, 1.4e9, 2.5).unwrap();
        assert!((e4 / e1 - 2.0).abs() < 1e-14);
        let e = onaxis_field(1e-18, 1.4e9, 1.0).unwrap();
        // √(1.4e-9)
        assert!((e - 3.741_657e-5).abs() < 1e-11);
        assert!(onaxis_field(-1e-18, 1.4e9, 1.0).is_err());
    }

    #[test]
    fn photon_examples() {
        let one = HBAR * angular_frequency(6e9);
        assert!((photon_number(one, 6e9) - 1.0).abs() < 1e-14);
        assert_eq!(photon_number(0.0, 6e9), 0.0);
        assert!((photon_number(1000.0 * one, 6e9) - 1000.0).abs() < 1e-10);
        assert!((photon_number(3.974e-21, 6e9) - 999.6).abs() < 0.1);
        assert!((photon_number(3.974e-24, 6e9) - 0.9996).abs() < 1e-4);
    }

    #[test]
    fn stored_energy_consistent_with_decay_rate() {
        // P_T = ω U / Q₁
        let u = stored_energy_from_transmitted(2e-15, 1.4e9, 6e9).unwrap();
        assert!((angular_frequency(6e9) * u / 1.4e9 - 2e-15).abs() < 1e-28);
    }

    #[test]
    fn trapping_ratio_table_rows() {
        let r = flux_trapping_ratio(Measured::new(250.5, 13.3), Measured::new(254.8, 13.7)).unwrap();
        assert!((r.value - 1.017).abs() < 1e-3);
        assert!((r.sigma - 0.08).abs() < 0.012);
        let same = flux_trapping_ratio(Measured::new(50.4, 7.5), Measured::new(50.4, 7.5)).unwrap();
        assert_eq!(same.value, 1.0);
        assert!(matches!(
            flux_trapping_ratio(Measured::new(0.0, 5.2), Measured::new(-0.1, 6.4)),
            Err(PipelineError::UndefinedRatio { .. })
        ));
    }
}
