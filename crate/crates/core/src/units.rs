//! Physical constants and display-unit conversions.
//!
//! Everything inside the crate is SI (Ω/T, T, K, rad/s). The milligauss and
//! nΩ/mG helpers exist for I/O boundaries only.

use std::f64::consts::PI;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0e-7 * PI;

/// 1 mG expressed in tesla.
pub const TESLA_PER_MILLIGAUSS: f64 = 1.0e-7;

/// 1 nΩ/mG expressed in Ω/T.
pub const OHM_PER_TESLA_PER_NOHM_PER_MG: f64 = 1.0e-2;

#[inline]
pub fn angular_frequency(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

#[inline]
pub fn mg_to_tesla(mg: f64) -> f64 {
    mg * TESLA_PER_MILLIGAUSS
}

#[inline]
pub fn tesla_to_mg(t: f64) -> f64 {
    t / TESLA_PER_MILLIGAUSS
}

/// Ω/T → nΩ/mG.
#[inline]
pub fn ohm_per_tesla_to_nohm_per_mg(s: f64) -> f64 {
    s / OHM_PER_TESLA_PER_NOHM_PER_MG
}

/// nΩ/mG → Ω/T.
#[inline]
pub fn nohm_per_mg_to_ohm_per_tesla(s: f64) -> f64 {
    s * OHM_PER_TESLA_PER_NOHM_PER_MG
}
