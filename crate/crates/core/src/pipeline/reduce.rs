//! Batch reduction of a directory's worth of decay traces into a `QDataset`.

use std::collections::BTreeMap;

use super::{
    average_thermalized, onaxis_field, photon_number, q0_from_ql, ql_from_decay,
    stored_energy_from_transmitted, DecayOptions, DecayTrace, Measured, PipelineError, QDataset,
    QRow, Result, ThermalizationCriterion,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionOptions {
    pub decay: DecayOptions,
    pub thermalization: ThermalizationCriterion,
    /// Antenna (coupling) quality factor.
    pub q1: f64,
    /// On-axis field calibration, (V/m)/√W.
    pub calibration: f64,
    /// Logarithmic field bins per decade.
    pub bins_per_decade: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            decay: DecayOptions::default(),
            thermalization: ThermalizationCriterion::default(),
            q1: 1.4e9,
            calibration: 1.0,
            bins_per_decade: 1.0,
        }
    }
}

/// Log-spaced field bin index; `None` for non-positive fields.
pub fn field_bin(field_v_per_m: f64, bins_per_decade: f64) -> Option<i64> {
    (field_v_per_m > 0.0 && field_v_per_m.is_finite())
        .then(|| (field_v_per_m.log10() * bins_per_decade).floor() as i64)
}

/// What happened to one (averaged) temperature group.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub label: String,
    pub temperature_k: f64,
    pub traces_averaged: usize,
    pub windows_retained: usize,
    /// Non-decaying or below-floor windows.
    pub windows_flagged: usize,
    /// Windows with `Q_L ≥ Q₁`.
    pub windows_nonphysical: usize,
    pub rows: usize,
    /// Reduction failure, if the group produced no rows.
    pub error: Option<String>,
}

/// Groups traces by bath temperature, averages each thermalized group,
/// converts every decay window into `(E, n, Q₀)` and averages `Q₀` within
/// log-spaced field bins.
///
/// Groups that fail to reduce are reported and skipped; an error is returned
/// only when no group yields a row.
pub fn reduce_traces(
    traces: &[DecayTrace],
    cooldown_id: &str,
    b_trap: Measured,
    opts: &ReductionOptions,
) -> Result<(QDataset, Vec<TraceReport>)> {
    let mut sorted: Vec<&DecayTrace> = traces.iter().collect();
    sorted.sort_by(|a, b| a.temperature.total_cmp(&b.temperature));

    let mut groups: Vec<Vec<DecayTrace>> = Vec::new();
    for tr in sorted {
        match groups.last_mut() {
            Some(g) if opts.thermalization.accepts(tr.temperature, g[0].temperature) => {
                g.push(tr.clone())
            }
            _ => groups.push(vec![tr.clone()]),
        }
    }

    let mut rows = Vec::new();
    let mut reports = Vec::with_capacity(groups.len());
    for group in &groups {
        let mut report = TraceReport {
            label: group[0].label.clone(),
            temperature_k: group[0].temperature,
            traces_averaged: 0,
            windows_retained: 0,
            windows_flagged: 0,
            windows_nonphysical: 0,
            rows: 0,
            error: None,
        };
        match reduce_group(group, opts, &mut report) {
            Ok(mut r) => {
                report.rows = r.len();
                rows.append(&mut r);
            }
            Err(e) => report.error = Some(e.to_string()),
        }
        reports.push(report);
    }
    if rows.is_empty() {
        return Err(PipelineError::InvalidDataset {
            id: cooldown_id.to_string(),
            reason: "no trace produced a valid Q0 row".into(),
        });
    }
    Ok((QDataset::new(cooldown_id, b_trap, rows)?, reports))
}

#[derive(Default)]
struct Bin {
    q0: Vec<f64>,
    log_field: f64,
    photons: f64,
}

fn reduce_group(
    group: &[DecayTrace],
    opts: &ReductionOptions,
    report: &mut TraceReport,
) -> Result<Vec<QRow>> {
    let avg = average_thermalized(group, &opts.thermalization)?;
    report.traces_averaged = avg.n_averaged;
    report.temperature_k = avg.temperature;
    let red = ql_from_decay(&avg, &opts.decay)?;
    report.windows_flagged = red.flagged;

    let mut bins: BTreeMap<i64, Bin> = BTreeMap::new();
    for p in &red.points {
        let q0 = match q0_from_ql(p.q_l, opts.q1) {
            Ok(q) => q,
            Err(_) => {
                report.windows_nonphysical += 1;
                continue;
            }
        };
        let e = onaxis_field(p.power_w, opts.q1, opts.calibration)?;
        let Some(key) = field_bin(e, opts.bins_per_decade) else {
            report.windows_flagged += 1;
            continue;
        };
        let u = stored_energy_from_transmitted(p.power_w, opts.q1, avg.f0)?;
        let bin = bins.entry(key).or_default();
        bin.q0.push(q0);
        bin.log_field += e.ln();
        bin.photons += photon_number(u, avg.f0);
        report.windows_retained += 1;
    }

    Ok(bins
        .into_values()
        .map(|b| {
            let k = b.q0.len() as f64;
            let mean = b.q0.iter().sum::<f64>() / k;
            let err = if b.q0.len() > 1 {
                let var = b.q0.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt()
            } else {
                0.0
            };
            QRow {
                temperature_k: avg.temperature,
                field_v_per_m: (b.log_field / k).exp(),
                photon_n: b.photons / k,
                q0: mean,
                q0_err: err,
                f0_hz: avg.f0,
                f0_err: avg.f0_err,
            }
        })
        .collect())
}
