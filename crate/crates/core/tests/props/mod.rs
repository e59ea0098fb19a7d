#![allow(dead_code)]

//! Randomized invariant sweeps shared by the `properties` and `acceptance`
//! targets. Every sweep runs `CASES` cases from a fixed RNG.

use fluxloss_core::fitting::{fit_simultaneous, FitConfig};
use fluxloss_core::model::{
    flux_flow_resistivity, sensitivity_model, surface_impedance, t1_bound, MaterialParams, PinningParams,
};
use fluxloss_core::pipeline::{extract_sensitivity, flux_trapping_ratio, MatchOptions, Measured, SensitivityCurve};
use fluxloss_core::synth::{generate_qdatasets, generate_sensitivity_curves, TemperatureGrid};
use fluxloss_core::units::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use crate::common::{published_spec, rel};

pub const CASES: u32 = 1000;

pub type Property = (&'static str, fn() -> Result<(), String>);

pub const ALL: [Property; 8] = [
    ("sigma scaling leaves the fit unchanged", sigma_scaling),
    ("dataset permutation invariance", permutation),
    ("impedance expansion matches sensitivity", impedance_expansion),
    ("unit round trips", unit_round_trips),
    ("domain guards reject out-of-range input", domain_guards),
    ("generator/extractor inversion", inversion),
    ("reactive part linear in F, resistive part F-free", f_linearity),
    ("equal flux-gate readings give unit ratio", unit_ratio),
];

fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn small_curves(seed: u64) -> Vec<SensitivityCurve> {
    let mut spec = published_spec(0.05, seed);
    spec.temperatures_k = TemperatureGrid::Linear { min: 0.01, max: 1.3, n: 12 };
    generate_sensitivity_curves(&spec).unwrap()
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), TestCaseError> {
    prop_assert!(rel(a, b) <= tol, "{what}: {a} vs {b}");
    Ok(())
}

pub fn sigma_scaling() -> Result<(), String> {
    check((any::<u64>(), -3.0f64..3.0), |(seed, log_c)| {
        let c = 10f64.powf(log_c);
        let mp = MaterialParams::default();
        let curves = small_curves(seed);
        let mut scaled = curves.clone();
        for p in scaled.iter_mut().flat_map(|c| c.points.iter_mut()) {
            p.s_err *= c;
            p.s_prime_err *= c;
        }
        let a = fit_simultaneous(&curves, &mp, &FitConfig::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = fit_simultaneous(&scaled, &mp, &FitConfig::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for i in 0..a.values.len() {
            close(b.values[i], a.values[i], 1e-6, &a.parameter_names[i])?;
        }
        Ok(())
    })
}

pub fn permutation() -> Result<(), String> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    check((any::<u64>(), 0usize..6), |(seed, pi)| {
        let mp = MaterialParams::default();
        let curves = small_curves(seed);
        let perm = perms[pi];
        let permuted: Vec<_> = perm.iter().map(|&i| curves[i].clone()).collect();
        let a = fit_simultaneous(&curves, &mp, &FitConfig::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = fit_simultaneous(&permuted, &mp, &FitConfig::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        close(b.values[0], a.values[0], 1e-6, "omega0")?;
        close(b.values[1], a.values[1], 1e-6, "alpha")?;
        for (j, &i) in perm.iter().enumerate() {
            close(b.dataset_params[j].f, a.dataset_params[i].f, 1e-6, "f")?;
        }
        Ok(())
    })
}

pub fn impedance_expansion() -> Result<(), String> {
    check((0.0f64..1.5, 9.0f64..12.0, -2.0f64..5.0), |(t, log_w0, alpha)| {
        let mp = MaterialParams::default();
        let pp = PinningParams::new(10f64.powf(log_w0), alpha, 1.0).unwrap();
        let b = 1e-8;
        let w = mp.omega();
        let dz = (surface_impedance(t, b, w, &mp, &pp).unwrap() - surface_impedance(t, 0.0, w, &mp, &pp).unwrap()) / b;
        let s = sensitivity_model(t, w, &mp, &pp).unwrap().as_complex();
        prop_assert!((dz - s).norm() <= 1e-4 * s.norm(), "ΔZ/B = {dz}, S + iS' = {s}");
        Ok(())
    })
}

pub fn unit_round_trips() -> Result<(), String> {
    check(-12.0f64..12.0, |e| {
        let v = 10f64.powf(e);
        close(tesla_to_mg(mg_to_tesla(v)), v, 1e-14, "mG")?;
        close(mg_to_tesla(tesla_to_mg(v)), v, 1e-14, "T")?;
        close(nohm_per_mg_to_ohm_per_tesla(ohm_per_tesla_to_nohm_per_mg(v)), v, 1e-14, "Ω/T")?;
        close(ohm_per_tesla_to_nohm_per_mg(v), v * 100.0, 1e-14, "nΩ/mG scale")?;
        Ok(())
    })
}

pub fn domain_guards() -> Result<(), String> {
    check((0.999f64..50.0, 1e-12f64..1.0, 0.0f64..1.0), |(t_frac, neg_b, t_ok)| {
        let mp = MaterialParams::default();
        let pp = PinningParams::published(1.0);
        let w = mp.omega();
        prop_assert!(sensitivity_model(t_frac * mp.tc, w, &mp, &pp).is_err());
        prop_assert!(sensitivity_model(-t_ok - 1e-9, w, &mp, &pp).is_err());
        prop_assert!(sensitivity_model(t_ok, -w * neg_b, &mp, &pp).is_err());
        prop_assert!(flux_flow_resistivity(t_ok, -neg_b, &mp).is_err());
        prop_assert!(t1_bound(None, 0.02, -neg_b, &mp).is_err());
        prop_assert!(flux_trapping_ratio(Measured::new(neg_b * 0.5, neg_b), Measured::new(1.0, 0.1)).is_err());
        prop_assert!(sensitivity_model(t_ok, w, &mp, &pp).is_ok());
        Ok(())
    })
}

pub fn inversion() -> Result<(), String> {
    check(
        (9.5f64..11.0, 0.1f64..2.0, 1.0f64..4.0, 1.0f64..300.0, any::<u64>()),
        |(log_w0, alpha, log_f, b_mg, seed)| {
            let mut spec = published_spec(0.0, seed);
            spec.temperatures_k = TemperatureGrid::Linear { min: 0.01, max: 1.3, n: 6 };
            spec.datasets.truncate(1);
            spec.datasets[0].b_trap_tesla = b_mg * 1e-7;
            spec.datasets[0].pinning = PinningParams::new(10f64.powf(log_w0), alpha, 10f64.powf(log_f)).unwrap();
            let q = generate_qdatasets(&spec).unwrap();
            let c = extract_sensitivity(&q.reference, &q.flux[0], &spec.material, &MatchOptions::default()).unwrap();
            prop_assert_eq!(c.len(), 6);
            for p in &c.points {
                let m = sensitivity_model(p.temperature_k, spec.material.omega(), &spec.material, &spec.datasets[0].pinning)
                    .unwrap();
                close(p.s, m.s, 1e-6, "S")?;
                close(p.s_prime, m.s_prime, 1e-6, "S'")?;
            }
            Ok(())
        },
    )
}

pub fn f_linearity() -> Result<(), String> {
    check((0.0f64..2.0, 0.0f64..1e4, 0.5f64..3.0), |(t, f, k)| {
        let mp = MaterialParams::default();
        let w = mp.omega();
        let a = sensitivity_model(t, w, &mp, &PinningParams::new(2.22e10, 0.701, f).unwrap()).unwrap();
        let b = sensitivity_model(t, w, &mp, &PinningParams::new(2.22e10, 0.701, f * k).unwrap()).unwrap();
        prop_assert_eq!(a.s, b.s);
        prop_assert!((b.s_prime - k * a.s_prime).abs() <= 1e-12 * b.s_prime.abs());
        Ok(())
    })
}

pub fn unit_ratio() -> Result<(), String> {
    check((1e-9f64..1e3, 0.0f64..0.5), |(b, rel_sigma)| {
        let m = Measured::new(b, b * rel_sigma);
        let r = flux_trapping_ratio(m, m).unwrap();
        prop_assert_eq!(r.value, 1.0);
        Ok(())
    })
}
