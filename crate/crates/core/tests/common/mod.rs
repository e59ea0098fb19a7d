#![allow(dead_code)]

use fluxloss_core::model::{MaterialParams, PinningParams};
use fluxloss_core::pipeline::SensitivityCurve;
use fluxloss_core::synth::{
    generate_sensitivity_curves, NoiseModel, ReferenceQ, SynthDataset, SynthSpec, TemperatureGrid,
};

pub const OMEGA0: f64 = 2.22e10;
pub const ALPHA: f64 = 0.701;
pub const F_VALUES: [f64; 3] = [1910.0, 743.0, 497.0];
pub const B_MG: [f64; 3] = [50.0, 100.0, 250.0];

pub fn published_spec(noise: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        material: MaterialParams::default(),
        datasets: (0..3)
            .map(|k| SynthDataset {
                cooldown_id: format!("CD{}", k + 2),
                b_trap_tesla: B_MG[k] * 1e-7,
                b_trap_err_tesla: 0.0,
                pinning: PinningParams::published(F_VALUES[k]),
            })
            .collect(),
        temperatures_k: TemperatureGrid::Linear { min: 0.01, max: 1.3, n: 25 },
        fields_v_per_m: vec![50.0],
        noise: NoiseModel::relative(noise),
        reference_q0: ReferenceQ::Constant(5e9),
        reference_id: "CD1".into(),
        q1: 1.4e9,
        calibration: 1.0,
        decay: None,
        seed,
    }
}

/// Noiseless curves with σ set to `rel` of each value.
pub fn exact_curves(rel: f64) -> Vec<SensitivityCurve> {
    let mut curves = generate_sensitivity_curves(&published_spec(0.0, 0)).unwrap();
    for c in &mut curves {
        for p in &mut c.points {
            p.s_err = rel * p.s.abs();
            p.s_prime_err = rel * p.s_prime.abs();
        }
    }
    curves
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
