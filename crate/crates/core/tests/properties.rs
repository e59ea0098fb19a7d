mod common;
mod props;

use fluxloss_core::model::{sensitivity_model, MaterialParams};
use fluxloss_core::synth::{generate_sensitivity_curves, TemperatureGrid};

#[test]
fn sigma_scaling() {
    props::sigma_scaling().unwrap();
}

#[test]
fn permutation() {
    props::permutation().unwrap();
}

#[test]
fn impedance_expansion() {
    props::impedance_expansion().unwrap();
}

#[test]
fn unit_round_trips() {
    props::unit_round_trips().unwrap();
}

#[test]
fn domain_guards() {
    props::domain_guards().unwrap();
}

#[test]
fn inversion() {
    props::inversion().unwrap();
}

#[test]
fn f_linearity() {
    props::f_linearity().unwrap();
}

#[test]
fn unit_ratio() {
    props::unit_ratio().unwrap();
}

#[test]
fn noise_level_matches_spec() {
    let mut spec = common::published_spec(0.05, 99);
    spec.temperatures_k = TemperatureGrid::Linear { min: 0.01, max: 1.3, n: 3400 };
    let mp = MaterialParams::default();
    let mut dev = Vec::new();
    for (c, d) in generate_sensitivity_curves(&spec).unwrap().iter().zip(&spec.datasets) {
        for p in &c.points {
            let m = sensitivity_model(p.temperature_k, mp.omega(), &mp, &d.pinning).unwrap();
            dev.push((p.s - m.s) / m.s);
            dev.push((p.s_prime - m.s_prime) / m.s_prime);
        }
    }
    assert!(dev.len() >= 10_000);
    let n = dev.len() as f64;
    let mean = dev.iter().sum::<f64>() / n;
    let sd = (dev.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(((sd - 0.05) / 0.05).abs() < 0.10, "{sd}");
}
