use super::{
    field_bin, PipelineError, PointSource, QDataset, QRow, Result, SensitivityCurve,
    SensitivityPoint,
};
use crate::model::MaterialParams;

/// How flux-cooldown rows are paired with reference rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Maximum temperature offset for nearest-neighbour matching (K).
    pub temperature_tol_k: f64,
    /// Field bins per decade; rows pair only within the same bin.
    pub bins_per_decade: f64,
    /// Linearly interpolate the reference `1/Q₀` and `f₀` in temperature when
    /// the flux row is bracketed by reference rows of the same field bin.
    pub interpolate: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            temperature_tol_k: 0.010,
            bins_per_decade: 1.0,
            interpolate: false,
        }
    }
}

/// Reference quantities at the flux row's operating point.
struct RefPoint {
    inv_q0: f64,
    inv_q0_err: f64,
    f0: f64,
    f0_err: f64,
    row: usize,
}

impl RefPoint {
    fn from_row(i: usize, r: &QRow) -> Self {
        Self {
            inv_q0: 1.0 / r.q0,
            inv_q0_err: r.q0_err / (r.q0 * r.q0),
            f0: r.f0_hz,
            f0_err: r.f0_err,
            row: i,
        }
    }
}

fn match_reference(reference: &QDataset, flux: &QRow, opts: &MatchOptions) -> Option<RefPoint> {
    let bin = field_bin(flux.field_v_per_m, opts.bins_per_decade);
    let candidates: Vec<(usize, &QRow)> = reference
        .rows()
        .iter()
        .enumerate()
        .filter(|(_, r)| field_bin(r.field_v_per_m, opts.bins_per_decade) == bin)
        .collect();

    let log_gap = |r: &QRow| {
        if r.field_v_per_m > 0.0 && flux.field_v_per_m > 0.0 {
            (r.field_v_per_m.ln() - flux.field_v_per_m.ln()).abs()
        } else {
            (r.field_v_per_m - flux.field_v_per_m).abs()
        }
    };

    if opts.interpolate {
        let below = candidates
            .iter()
            .filter(|(_, r)| r.temperature_k <= flux.temperature_k)
            .max_by(|a, b| a.1.temperature_k.total_cmp(&b.1.temperature_k));
        let above = candidates
            .iter()
            .filter(|(_, r)| r.temperature_k > flux.temperature_k)
            .min_by(|a, b| a.1.temperature_k.total_cmp(&b.1.temperature_k));
        if let (Some(&(i_lo, lo)), Some(&(i_hi, hi))) = (below, above) {
            let w = (flux.temperature_k - lo.temperature_k) / (hi.temperature_k - lo.temperature_k);
            let (a, b) = (RefPoint::from_row(i_lo, lo), RefPoint::from_row(i_hi, hi));
            return Some(RefPoint {
                inv_q0: (1.0 - w) * a.inv_q0 + w * b.inv_q0,
                inv_q0_err: ((1.0 - w) * a.inv_q0_err).hypot(w * b.inv_q0_err),
                f0: (1.0 - w) * a.f0 + w * b.f0,
                f0_err: ((1.0 - w) * a.f0_err).hypot(w * b.f0_err),
                row: if w < 0.5 { i_lo } else { i_hi },
            });
        }
    }

    candidates
        .into_iter()
        .filter(|(_, r)| (r.temperature_k - flux.temperature_k).abs() <= opts.temperature_tol_k)
        .min_by(|a, b| {
            let da = (a.1.temperature_k - flux.temperature_k).abs();
            let db = (b.1.temperature_k - flux.temperature_k).abs();
            da.total_cmp(&db).then(log_gap(a.1).total_cmp(&log_gap(b.1)))
        })
        .map(|(i, r)| RefPoint::from_row(i, r))
}

/// Resistive and reactive sensitivity from a flux cooldown relative to a
/// field-free reference:
///
/// ```text
/// S  =  (G/B)(1/Q₀,ₙ − 1/Q₀,₁)
/// S' = −(2G/B)(f₀,ₙ − f₀,₁)/f₀,₁(0)
/// ```
///
/// `f₀,₁(0)` is the reference's lowest-temperature frequency. Uncertainties
/// are first-order, independent, and include the trapped-field error.
pub fn extract_sensitivity(
    reference: &QDataset,
    flux: &QDataset,
    mp: &MaterialParams,
    opts: &MatchOptions,
) -> Result<SensitivityCurve> {
    let b_ref = reference.b_trap;
    if b_ref.value != 0.0 && b_ref.value.abs() > b_ref.sigma {
        return Err(PipelineError::ReferenceNotFieldFree {
            id: reference.cooldown_id.clone(),
            b: b_ref.value,
            sigma: b_ref.sigma,
        });
    }
    let b = flux.b_trap;
    if !(b.value > 0.0 && b.value > b.sigma) {
        return Err(PipelineError::IllConditionedNormalization {
            b: b.value,
            sigma: b.sigma,
        });
    }
    let no_match = || PipelineError::NoMatches {
        reference: reference.cooldown_id.clone(),
        flux: flux.cooldown_id.clone(),
    };
    let f_ref0 = reference.rows().first().ok_or_else(no_match)?.f0_hz;
    let rel_b = b.sigma / b.value;
    let g = mp.g;

    let mut points = Vec::new();
    for (j, row) in flux.rows().iter().enumerate() {
        let Some(r) = match_reference(reference, row, opts) else {
            continue;
        };
        let inv_qn = 1.0 / row.q0;
        let inv_qn_err = row.q0_err / (row.q0 * row.q0);
        let s = g / b.value * (inv_qn - r.inv_q0);
        let s_err = ((g / b.value).powi(2) * (inv_qn_err.powi(2) + r.inv_q0_err.powi(2))
            + (s * rel_b).powi(2))
        .sqrt();

        let k = 2.0 * g / (b.value * f_ref0);
        let s_prime = -k * (row.f0_hz - r.f0);
        let s_prime_err =
            (k * k * (row.f0_err.powi(2) + r.f0_err.powi(2)) + (s_prime * rel_b).powi(2)).sqrt();

        points.push(SensitivityPoint {
            temperature_k: row.temperature_k,
            field_v_per_m: row.field_v_per_m,
            s,
            s_err,
            s_prime,
            s_prime_err,
            source: Some(PointSource {
                reference_row: r.row,
                flux_row: j,
            }),
        });
    }
    if points.is_empty() {
        return Err(no_match());
    }
    Ok(SensitivityCurve {
        cooldown_id: flux.cooldown_id.clone(),
        b_trap: Some(b.value),
        points,
    })
}
