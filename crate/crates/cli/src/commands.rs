use std::fs;
use std::path::{Path, PathBuf};

use fluxloss_core::fitting::{fit_simultaneous, predict_curves, FitError, ParamValue};
use fluxloss_core::io::{
    read_curve, read_decay_trace, read_json, read_qdataset, write_curve, write_decay_trace,
    write_json, write_model_curves, write_qdataset, FitReport,
};
use fluxloss_core::model::{sensitivity_model, t1_bound, PinningParams};
use fluxloss_core::pipeline::{extract_sensitivity, reduce_traces, Measured};
use fluxloss_core::synth::{
    generate_qdatasets, generate_reference_decays, generate_sensitivity_curves, linspace, SynthSpec, RNG_ALGORITHM,
};
use fluxloss_core::units::{
    mg_to_tesla, nohm_per_mg_to_ohm_per_tesla, ohm_per_tesla_to_nohm_per_mg, tesla_to_mg,
};
use log::{info, warn};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))
}

/// Pinning parameters from either a bare parameter file or a fit report.
#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsFile {
    Pinning(PinningParams),
    Report(Box<FitReport>),
}

fn scalar_for(v: &ParamValue, k: usize, name: &str) -> Result<f64, CliError> {
    match v {
        ParamValue::Scalar(x) => Ok(*x),
        ParamValue::PerDataset(xs) => xs
            .get(k)
            .copied()
            .ok_or_else(|| CliError::Usage(format!("fit report has no {name} for dataset {k}"))),
    }
}

pub fn load_params(path: Option<&Path>, dataset: usize, f: Option<f64>) -> Result<PinningParams, CliError> {
    let mut p = match path {
        None => PinningParams::published(1.0),
        Some(path) => match read_json::<ParamsFile>(path).map_err(|e| CliError::Usage(e.to_string()))? {
            ParamsFile::Pinning(p) => p,
            ParamsFile::Report(r) => PinningParams {
                omega0: scalar_for(&r.params.omega0_rad_s, dataset, "omega0")?,
                alpha: scalar_for(&r.params.alpha_per_k, dataset, "alpha")?,
                f: *r.params.f.get(dataset).ok_or_else(|| {
                    CliError::Usage(format!("fit report has no F for dataset {dataset}"))
                })?,
            },
        },
    };
    if let Some(f) = f {
        p.f = f;
    }
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(p)
}

pub struct ModelArgs<'a> {
    pub params: Option<&'a Path>,
    pub dataset: usize,
    pub f: Option<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
    pub out: &'a Path,
}

pub fn model(cfg: &RunConfig, a: ModelArgs<'_>) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if !(a.t_min <= a.t_max) {
        return Err(CliError::Usage(format!("--t-min {} exceeds --t-max {}", a.t_min, a.t_max)));
    }
    let pp = load_params(a.params, a.dataset, a.f)?;
    let grid = linspace(a.t_min, a.t_max, a.n);
    let curves = predict_curves(&[pp], &cfg.material, &grid, cfg.material.omega()).map_err(data)?;
    let out = cfg.resolve_output(a.out)?;
    write_model_curves(&out, &["model".into()], &curves).map_err(data)?;
    let first = &curves[0][0];
    info!(
        "S({} K) = {:.4} nΩ/mG, S'({} K) = {:.4} nΩ/mG; {} rows -> {}",
        first.temperature_k,
        ohm_per_tesla_to_nohm_per_mg(first.s),
        first.temperature_k,
        ohm_per_tesla_to_nohm_per_mg(first.s_prime),
        grid.len(),
        out.display()
    );
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

pub struct ExtractArgs<'a> {
    pub decays: &'a Path,
    pub q1: Option<f64>,
    pub cooldown_id: Option<String>,
    pub b_trap_mg: f64,
    pub b_trap_err_mg: f64,
    pub out: &'a Path,
    pub jobs: usize,
}

pub fn extract(cfg: &RunConfig, a: ExtractArgs<'_>) -> Result<(), CliError> {
    let files = csv_files(a.decays)?;
    if files.is_empty() {
        return Err(CliError::Data(format!("{}: no decay trace files (*.csv)", a.decays.display())));
    }
    let traces = pool(a.jobs)?
        .install(|| files.par_iter().map(|p| read_decay_trace(p)).collect::<Result<Vec<_>, _>>())
        .map_err(data)?;

    let mut opts = cfg.pipeline.reduction();
    if let Some(q1) = a.q1 {
        opts.q1 = q1;
    }
    if !(opts.q1 > 0.0) {
        return Err(CliError::Usage(format!("q1 must be positive, got {}", opts.q1)));
    }
    let id = a.cooldown_id.unwrap_or_else(|| {
        a.decays
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "cooldown".into())
    });
    let b = Measured::new(mg_to_tesla(a.b_trap_mg), mg_to_tesla(a.b_trap_err_mg));
    let (ds, reports) = reduce_traces(&traces, &id, b, &opts).map_err(data)?;
    for r in &reports {
        info!(
            "{} @ {:.4} K: {} trace(s), {} windows retained, {} flagged, {} rows",
            r.label, r.temperature_k, r.traces_averaged, r.windows_retained, r.windows_flagged, r.rows
        );
        if r.windows_nonphysical > 0 {
            warn!(
                "{}: {} window(s) with Q_L ≥ Q1 = {:e} excluded",
                r.label, r.windows_nonphysical, opts.q1
            );
        }
        if let Some(e) = &r.error {
            warn!("{}: {e}", r.label);
        }
    }
    let out = cfg.resolve_output(a.out)?;
    write_qdataset(&out, &ds, None).map_err(data)?;
    info!("{} rows -> {}", ds.rows().len(), out.display());
    Ok(())
}

pub fn sensitivity(cfg: &RunConfig, reference: &Path, flux: &Path, out: &Path) -> Result<(), CliError> {
    let r = read_qdataset(reference).map_err(data)?;
    let f = read_qdataset(flux).map_err(data)?;
    let curve = extract_sensitivity(&r, &f, &cfg.material, &cfg.pipeline.matching()).map_err(data)?;
    let out = cfg.resolve_output(out)?;
    write_curve(&out, &curve, None).map_err(data)?;
    if let Some(p) = curve.points.first() {
        info!(
            "{} at B = {:.1} mG: {} points; S({:.3} K) = {:.3} ± {:.3} nΩ/mG",
            curve.cooldown_id,
            tesla_to_mg(f.b_trap.value),
            curve.len(),
            p.temperature_k,
            ohm_per_tesla_to_nohm_per_mg(p.s),
            ohm_per_tesla_to_nohm_per_mg(p.s_err)
        );
    }
    Ok(())
}

/// Dense model grid spanning the data, used for the companion curve file.
const PREDICT_POINTS: usize = 200;

pub fn fit(cfg: &RunConfig, curves: &[PathBuf], out: &Path, jobs: usize) -> Result<(), CliError> {
    if curves.is_empty() {
        return Err(CliError::Usage("at least one --curves file required".into()));
    }
    let data_curves = pool(jobs)?
        .install(|| curves.par_iter().map(|p| read_curve(p)).collect::<Result<Vec<_>, _>>())
        .map_err(data)?;
    let result = fit_simultaneous(&data_curves, &cfg.material, &cfg.fit).map_err(|e| match e {
        FitError::Config(_) => CliError::Usage(e.to_string()),
        _ => data(e),
    })?;
    if !result.converged {
        warn!("iteration limit reached ({} iterations)", result.n_iterations);
    }
    let report = FitReport::new(&result, &data_curves);
    let out = cfg.resolve_output(out)?;
    write_json(&out, &report).map_err(data)?;

    let (lo, hi) = data_curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.temperature_k))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
    let grid = linspace(lo, hi, PREDICT_POINTS);
    let model = predict_curves(&result.dataset_params, &cfg.material, &grid, cfg.material.omega()).map_err(data)?;
    let ids: Vec<String> = data_curves.iter().map(|c| c.cooldown_id.clone()).collect();
    let curve_path = out.with_extension("curves.csv");
    write_model_curves(&curve_path, &ids, &model).map_err(data)?;

    for (name, (v, s)) in result
        .parameter_names
        .iter()
        .zip(result.values.iter().zip(&result.uncertainties))
    {
        info!("{name} = {v:.6e} ± {s:.2e}");
    }
    info!(
        "chi2_red = {:.4}, {} iterations ({:?}) -> {}, {}",
        result.chi2_reduced,
        result.n_iterations,
        result.termination,
        out.display(),
        curve_path.display()
    );
    Ok(())
}

/// `--q-ox0` value: a quality factor, or `absent` for an oxide-free surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OxideQ {
    Absent,
    Value(f64),
}

impl std::str::FromStr for OxideQ {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("absent") {
            return Ok(Self::Absent);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 => Ok(Self::Value(v)),
            _ => Err(format!("expected a positive quality factor or `absent`, got `{s}`")),
        }
    }
}

pub struct T1Args<'a> {
    pub q_ox0: Option<OxideQ>,
    pub b_trap_mg: &'a [f64],
    pub params: Option<&'a Path>,
    pub temperature_k: Option<f64>,
    pub s_nohm_per_mg: Option<f64>,
    pub out: &'a Path,
}

pub const T1_HEADER: [&str; 4] = ["b_trap_mg", "b_trap_tesla", "t1_oxide_s", "t1_oxide_free_s"];

/// Infinite lifetimes are written as `inf`.
pub fn predict_t1(cfg: &RunConfig, a: T1Args<'_>) -> Result<(), CliError> {
    if a.b_trap_mg.is_empty() {
        return Err(CliError::Usage("--b-trap needs at least one value".into()));
    }
    let mp = &cfg.material;
    let s = match (a.params, a.s_nohm_per_mg) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--params and --s are mutually exclusive".into())),
        (Some(p), None) => {
            let pp = load_params(Some(p), 0, None)?;
            let t = a.temperature_k.unwrap_or(0.01);
            sensitivity_model(t, mp.omega(), mp, &pp).map_err(data)?.s
        }
        (None, s) => nohm_per_mg_to_ohm_per_tesla(s.unwrap_or(cfg.t1.s_nohm_per_mg)),
    };
    let q_ox = match a.q_ox0.unwrap_or(OxideQ::Value(cfg.t1.q_ox0)) {
        OxideQ::Absent => None,
        OxideQ::Value(q) => Some(q),
    };
    let mut rows = Vec::with_capacity(a.b_trap_mg.len());
    for &mg in a.b_trap_mg {
        let b = mg_to_tesla(mg);
        let with = t1_bound(q_ox, s, b, mp).map_err(data)?;
        let without = t1_bound(None, s, b, mp).map_err(data)?;
        info!("B = {mg} mG: T1 = {:.3} ms (oxide), {:.3} ms (oxide-free)", with * 1e3, without * 1e3);
        rows.push([mg, b, with, without]);
    }
    let out = cfg.resolve_output(a.out)?;
    let mut text = T1_HEADER.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.map(|v| v.to_string()).join(","));
        text.push('\n');
    }
    fs::write(&out, text).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    Ok(())
}

pub fn synth(cfg: &RunConfig, spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let spec: SynthSpec = read_json(spec_path).map_err(|e| CliError::Usage(e.to_string()))?;
    spec.validate().map_err(|e| CliError::Usage(format!("{}: {e}", spec_path.display())))?;
    let dir = cfg.resolve_output(&out.join("manifest.json"))?;
    let dir = dir.parent().map(Path::to_path_buf).unwrap_or_default();

    let curves = generate_sensitivity_curves(&spec).map_err(data)?;
    let q = generate_qdatasets(&spec).map_err(data)?;
    for sub in ["curves", "qdata"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    let provenance = json!({"rng": RNG_ALGORITHM, "seed": spec.seed, "noise": spec.noise});
    let mut files = Vec::new();
    for (c, d) in curves.iter().zip(&spec.datasets) {
        let p = dir.join("curves").join(format!("{}.csv", d.cooldown_id));
        let truth = json!({"pinning": d.pinning, "b_trap_tesla": d.b_trap_tesla, "generator": provenance});
        write_curve(&p, c, Some(truth)).map_err(data)?;
        files.push(p);
    }
    let p = dir.join("qdata").join(format!("{}.csv", spec.reference_id));
    write_qdataset(&p, &q.reference, Some(json!({"reference_q0": spec.reference_q0, "generator": provenance})))
        .map_err(data)?;
    files.push(p);
    for (ds, d) in q.flux.iter().zip(&spec.datasets) {
        let p = dir.join("qdata").join(format!("{}.csv", d.cooldown_id));
        let truth = json!({"pinning": d.pinning, "reference_q0": spec.reference_q0, "generator": provenance});
        write_qdataset(&p, ds, Some(truth)).map_err(data)?;
        files.push(p);
    }
    if spec.decay.is_some() {
        let decay_dir = dir.join("decays").join(&spec.reference_id);
        fs::create_dir_all(&decay_dir).map_err(|e| CliError::Data(format!("{}: {e}", decay_dir.display())))?;
        for tr in generate_reference_decays(&spec).map_err(data)? {
            let p = decay_dir.join(format!("{}.csv", tr.label));
            let q0 = spec.reference_q0.at(tr.temperature);
            let truth = json!({"q0": q0, "q_l": 1.0 / (1.0 / q0 + 1.0 / spec.q1), "generator": provenance});
            write_decay_trace(&p, &tr, Some(truth)).map_err(data)?;
            files.push(p);
        }
    }
    let manifest = json!({
        "spec": spec,
        "rng": RNG_ALGORITHM,
        "files": files
            .iter()
            .map(|f| f.strip_prefix(&dir).unwrap_or(f).to_string_lossy().into_owned())
            .collect::<Vec<_>>(),
    });
    write_json(&dir.join("manifest.json"), &manifest).map_err(data)?;
    info!("{} tables -> {}", files.len(), dir.display());
    Ok(())
}
