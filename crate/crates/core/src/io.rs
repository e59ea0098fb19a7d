//! File formats: CSV tables with unit-bearing headers plus a sidecar JSON
//! (`<stem>.json`) carrying metadata. Floats are written in shortest
//! round-trip form, so every reader inverts its writer exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::fitting::{FitResult, ModelPoint, ParamValue, Termination};
use crate::pipeline::{
    DecayTrace, Measured, QDataset, QRow, SensitivityCurve, SensitivityPoint,
};
use crate::units::ohm_per_tesla_to_nohm_per_mg;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },
}

impl IoError {
    pub fn path(&self) -> &Path {
        match self {
            Self::Io { path, .. } | Self::Format { path, .. } | Self::Data { path, .. } => path,
        }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    fn data(path: &Path, message: impl ToString) -> Self {
        Self::Data {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, IoError>;

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::format(path, format!("line {}, column {}: {e}", e.line(), e.column())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_csv<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IoError::format(path, e))?;
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| IoError::format(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != header {
        return Err(IoError::format(
            path,
            format!("expected header `{}`, found `{}`", header.join(","), got.join(",")),
        ));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| IoError::format(path, format!("row {}: {e}", i + 1))))
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| IoError::format(path, e))?;
    w.write_record(header).map_err(|e| IoError::format(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| IoError::format(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub const DECAY_HEADER: [&str; 2] = ["time_s", "power_w"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayMeta {
    pub f0_hz: f64,
    pub temperature_k: f64,
    pub label: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub f0_err_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Value>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

pub fn read_decay_trace(path: &Path) -> Result<DecayTrace> {
    let meta: DecayMeta = read_json(&sidecar_path(path))?;
    let samples: Vec<(f64, f64)> = read_csv(path, &DECAY_HEADER)?;
    DecayTrace::new(samples, meta.f0_hz, meta.temperature_k, meta.label)
        .map(|t| t.with_f0_err(meta.f0_err_hz))
        .map_err(|e| IoError::data(path, e))
}

pub fn write_decay_trace(path: &Path, trace: &DecayTrace, truth: Option<Value>) -> Result<()> {
    write_csv(path, &DECAY_HEADER, trace.samples())?;
    write_json(
        &sidecar_path(path),
        &DecayMeta {
            f0_hz: trace.f0,
            temperature_k: trace.temperature,
            label: trace.label.clone(),
            f0_err_hz: trace.f0_err,
            truth,
        },
    )
}

pub const QDATASET_HEADER: [&str; 7] = [
    "temperature_k",
    "field_v_per_m",
    "photon_n",
    "q0",
    "q0_err",
    "f0_hz",
    "f0_err",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QDatasetMeta {
    pub cooldown_id: String,
    pub b_trap_tesla: f64,
    #[serde(default)]
    pub b_trap_err_tesla: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Value>,
}

pub fn read_qdataset(path: &Path) -> Result<QDataset> {
    let meta: QDatasetMeta = read_json(&sidecar_path(path))?;
    let rows: Vec<QRow> = read_csv(path, &QDATASET_HEADER)?;
    QDataset::new(meta.cooldown_id, Measured::new(meta.b_trap_tesla, meta.b_trap_err_tesla), rows)
        .map_err(|e| IoError::data(path, e))
}

pub fn write_qdataset(path: &Path, ds: &QDataset, truth: Option<Value>) -> Result<()> {
    write_csv(path, &QDATASET_HEADER, ds.rows())?;
    write_json(
        &sidecar_path(path),
        &QDatasetMeta {
            cooldown_id: ds.cooldown_id.clone(),
            b_trap_tesla: ds.b_trap.value,
            b_trap_err_tesla: ds.b_trap.sigma,
            truth,
        },
    )
}

pub const CURVE_HEADER: [&str; 6] = [
    "temperature_k",
    "field_v_per_m",
    "s_ohm_per_t",
    "s_err",
    "sprime_ohm_per_t",
    "sprime_err",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveMeta {
    pub cooldown_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_trap_tesla: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Value>,
}

type CurveRow = (f64, f64, f64, f64, f64, f64);

/// Reads a curve CSV. Without a sidecar the cooldown id is the file stem.
pub fn read_curve(path: &Path) -> Result<SensitivityCurve> {
    let side = sidecar_path(path);
    let meta = if side.exists() {
        read_json(&side)?
    } else {
        CurveMeta {
            cooldown_id: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            b_trap_tesla: None,
            truth: None,
        }
    };
    let rows: Vec<CurveRow> = read_csv(path, &CURVE_HEADER)?;
    let points = rows
        .into_iter()
        .map(|(t, e, s, se, sp, spe)| SensitivityPoint {
            temperature_k: t,
            field_v_per_m: e,
            s,
            s_err: se,
            s_prime: sp,
            s_prime_err: spe,
            source: None,
        })
        .collect();
    Ok(SensitivityCurve {
        cooldown_id: meta.cooldown_id,
        b_trap: meta.b_trap_tesla,
        points,
    })
}

pub fn write_curve(path: &Path, curve: &SensitivityCurve, truth: Option<Value>) -> Result<()> {
    let rows: Vec<CurveRow> = curve
        .points
        .iter()
        .map(|p| (p.temperature_k, p.field_v_per_m, p.s, p.s_err, p.s_prime, p.s_prime_err))
        .collect();
    write_csv(path, &CURVE_HEADER, &rows)?;
    write_json(
        &sidecar_path(path),
        &CurveMeta {
            cooldown_id: curve.cooldown_id.clone(),
            b_trap_tesla: curve.b_trap,
            truth,
        },
    )
}

pub const MODEL_HEADER: [&str; 5] = [
    "temperature_k",
    "s_ohm_per_t",
    "sprime_ohm_per_t",
    "s_nohm_per_mg",
    "sprime_nohm_per_mg",
];

/// Model curve table in SI and display units. A leading `dataset` column is
/// added when more than one curve is written.
pub fn write_model_curves(path: &Path, ids: &[String], curves: &[Vec<ModelPoint>]) -> Result<()> {
    let multi = curves.len() > 1;
    let mut header: Vec<&str> = Vec::new();
    if multi {
        header.push("dataset");
    }
    header.extend(MODEL_HEADER);
    let mut w = csv::Writer::from_path(path).map_err(|e| IoError::format(path, e))?;
    w.write_record(&header).map_err(|e| IoError::format(path, e))?;
    for (id, curve) in ids.iter().zip(curves) {
        for p in curve {
            let mut rec: Vec<String> = Vec::with_capacity(6);
            if multi {
                rec.push(id.clone());
            }
            rec.extend(
                [
                    p.temperature_k,
                    p.s,
                    p.s_prime,
                    ohm_per_tesla_to_nohm_per_mg(p.s),
                    ohm_per_tesla_to_nohm_per_mg(p.s_prime),
                ]
                .map(|v| v.to_string()),
            );
            w.write_record(&rec).map_err(|e| IoError::format(path, e))?;
        }
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub omega0_rad_s: ParamValue,
    pub alpha_per_k: ParamValue,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDataset {
    pub cooldown_id: String,
    pub b_trap_tesla: Option<f64>,
    /// 1-based position of this dataset when sorted by trapped field.
    pub b_trap_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: ReportParams,
    pub uncertainties: ReportParams,
    pub covariance: Vec<Vec<f64>>,
    pub parameter_order: Vec<String>,
    pub chi2_reduced: f64,
    pub n_points: usize,
    pub n_iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub datasets: Vec<ReportDataset>,
    pub notes: Vec<String>,
}

fn collapse(v: Vec<f64>) -> ParamValue {
    if v.windows(2).all(|w| w[0] == w[1]) {
        ParamValue::Scalar(v[0])
    } else {
        ParamValue::PerDataset(v)
    }
}

impl FitReport {
    pub fn new(result: &FitResult, curves: &[SensitivityCurve]) -> Self {
        let pick = |ps: &[crate::model::PinningParams]| ReportParams {
            omega0_rad_s: collapse(ps.iter().map(|p| p.omega0).collect()),
            alpha_per_k: collapse(ps.iter().map(|p| p.alpha).collect()),
            f: ps.iter().map(|p| p.f).collect(),
        };

        let mut order: Vec<usize> = (0..curves.len()).filter(|&k| curves[k].b_trap.is_some()).collect();
        order.sort_by(|&a, &b| curves[a].b_trap.unwrap_or(0.0).total_cmp(&curves[b].b_trap.unwrap_or(0.0)));
        let datasets = curves
            .iter()
            .enumerate()
            .map(|(k, c)| ReportDataset {
                cooldown_id: c.cooldown_id.clone(),
                b_trap_tesla: c.b_trap,
                b_trap_rank: order.iter().position(|&i| i == k).map(|r| r + 1),
            })
            .collect();

        let mut notes = vec![
            "f[k] belongs to datasets[k]; b_trap_rank orders datasets by trapped field, the order in which published F values are listed".to_string(),
            "S carries no F dependence, so the resistive data alone constrain omega0 and alpha; F is set by S' only".to_string(),
            "uncertainties are sqrt(diag(covariance)); covariance is (J^T W J)^-1 scaled by chi2_reduced".to_string(),
        ];
        if !result.converged {
            notes.push("iteration limit reached before convergence".to_string());
        }

        Self {
            params: pick(&result.dataset_params),
            uncertainties: pick(&result.dataset_uncertainties),
            covariance: result.covariance.clone(),
            parameter_order: result.parameter_names.clone(),
            chi2_reduced: result.chi2_reduced,
            n_points: result.n_points,
            n_iterations: result.n_iterations,
            converged: result.converged,
            termination: result.termination,
            datasets,
            notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::DecayTrace;

    #[test]
    fn decay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let samples: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 1e-3 / 7.0, (-(i as f64) / 3.0).exp() * 1e-13)).collect();
        let tr = DecayTrace::new(samples, 6.000_000_1e9, 0.0123, "a").unwrap().with_f0_err(12.5);
        write_decay_trace(&p, &tr, Some(serde_json::json!({"q_l": 1e9}))).unwrap();
        assert_eq!(read_decay_trace(&p).unwrap(), tr);
    }

    #[test]
    fn qdataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.csv");
        let row = |t: f64| QRow {
            temperature_k: t,
            field_v_per_m: 50.0 / 3.0,
            photon_n: 1.0e5 / 7.0,
            q0: 4.1e9 / 3.0,
            q0_err: 1e7 / 3.0,
            f0_hz: 6e9 - 0.1,
            f0_err: 0.3,
        };
        let ds = QDataset::new("CD2", Measured::new(5e-6, 1e-6 / 3.0), vec![row(0.5), row(0.01)]).unwrap();
        write_qdataset(&p, &ds, None).unwrap();
        assert_eq!(read_qdataset(&p).unwrap(), ds);
    }

    #[test]
    fn curve_round_trip_and_stem_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cd3.csv");
        let curve = SensitivityCurve {
            cooldown_id: "CD3".into(),
            b_trap: Some(1e-5),
            points: vec![SensitivityPoint {
                temperature_k: 0.1,
                field_v_per_m: 50.0,
                s: 0.019 / 7.0,
                s_err: 1e-4,
                s_prime: -1e-3,
                s_prime_err: 2e-5,
                source: None,
            }],
        };
        write_curve(&p, &curve, None).unwrap();
        assert_eq!(read_curve(&p).unwrap(), curve);
        fs::remove_file(sidecar_path(&p)).unwrap();
        let c = read_curve(&p).unwrap();
        assert_eq!(c.cooldown_id, "cd3");
        assert_eq!(c.b_trap, None);
    }

    #[test]
    fn errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "time,power\n0,1\n").unwrap();
        fs::write(sidecar_path(&p), r#"{"f0_hz": 6e9, "temperature_k": 0.1, "label": "x"}"#).unwrap();
        let e = read_decay_trace(&p).unwrap_err();
        assert_eq!(e.path(), p);
        assert!(e.to_string().contains("bad.csv"));

        fs::write(sidecar_path(&p), r#"{"f0_hz": 6e9, "temperature_k": 0.1, "label": "x", "extra": 1}"#).unwrap();
        let e = read_decay_trace(&p).unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");

        let missing = dir.path().join("none.csv");
        assert!(matches!(read_curve(&missing), Err(IoError::Format { .. })));
    }

    #[test]
    fn malformed_row_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(&p, format!("{}\n0.1,50,x,1,1,1\n", CURVE_HEADER.join(","))).unwrap();
        let e = read_curve(&p).unwrap_err().to_string();
        assert!(e.contains("row 1"), "{e}");
    }
}
