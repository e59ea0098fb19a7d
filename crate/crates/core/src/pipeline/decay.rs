use super::{DecayTrace, PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOptions {
    /// Samples per sliding regression window.
    pub window: usize,
    /// Windows touching a sample at or below this power (W) are flagged.
    pub noise_floor_w: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            window: 21,
            noise_floor_w: 0.0,
        }
    }
}

/// Loaded Q at one window position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QlPoint {
    /// Mean time of the window (s).
    pub time_s: f64,
    /// Fitted power at `time_s` (geometric mean over the window, W).
    pub power_w: f64,
    pub q_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReduction {
    pub points: Vec<QlPoint>,
    /// Windows excluded as non-decaying or below the noise floor.
    pub flagged: usize,
}

/// Field-resolved loaded quality factor `Q_L(t) = −ω / (d ln P_T / dt)`.
///
/// The log-derivative is the least-squares slope of `ln P_T` over a sliding
/// window, one estimate per window position.
pub fn ql_from_decay(trace: &DecayTrace, opts: &DecayOptions) -> Result<DecayReduction> {
    let n = trace.len();
    let w = opts.window;
    if w < 3 || w > n {
        return Err(PipelineError::Window {
            window: w,
            samples: n,
        });
    }
    let omega = trace.omega();
    let samples = trace.samples();
    let logs: Vec<Option<f64>> = samples
        .iter()
        .map(|&(_, p)| (p > opts.noise_floor_w && p > 0.0).then(|| p.ln()))
        .collect();

    let mut points = Vec::with_capacity(n - w + 1);
    let mut flagged = 0;
    for start in 0..=(n - w) {
        let Some(ys) = logs[start..start + w].iter().copied().collect::<Option<Vec<f64>>>() else {
            flagged += 1;
            continue;
        };
        let ts = &samples[start..start + w];
        let t_mean = ts.iter().map(|s| s.0).sum::<f64>() / w as f64;
        let y_mean = ys.iter().sum::<f64>() / w as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (&(t, _), &y) in ts.iter().zip(&ys) {
            let dt = t - t_mean;
            sxy += dt * (y - y_mean);
            sxx += dt * dt;
        }
        let slope = sxy / sxx;
        if !(slope < 0.0) {
            flagged += 1;
            continue;
        }
        points.push(QlPoint {
            time_s: t_mean,
            power_w: y_mean.exp(),
            q_l: -omega / slope,
        });
    }
    if points.is_empty() {
        return Err(PipelineError::NoDecay(trace.label.clone()));
    }
    Ok(DecayReduction { points, flagged })
}

/// Accepts traces whose bath temperature lies within a relative band of the
/// group median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalizationCriterion {
    pub max_relative_drift: f64,
}

impl Default for ThermalizationCriterion {
    fn default() -> Self {
        Self {
            max_relative_drift: 0.01,
        }
    }
}

impl ThermalizationCriterion {
    pub fn accepts(&self, t: f64, reference: f64) -> bool {
        if reference == 0.0 {
            return t == 0.0;
        }
        ((t - reference) / reference).abs() <= self.max_relative_drift
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn interpolate(samples: &[(f64, f64)], t: f64) -> Option<f64> {
    let first = samples.first()?;
    let last = samples.last()?;
    if t < first.0 || t > last.0 {
        return None;
    }
    let hi = samples.partition_point(|s| s.0 < t);
    if hi == 0 {
        return Some(first.1);
    }
    let (t0, p0) = samples[hi - 1];
    let (t1, p1) = samples[hi];
    Some(p0 + (p1 - p0) * (t - t0) / (t1 - t0))
}

/// Pointwise mean of the traces that pass `criterion`.
///
/// Traces on a different time grid are linearly resampled onto the grid of
/// the first accepted trace; grid points outside any accepted trace are
/// dropped.
pub fn average_thermalized(
    traces: &[DecayTrace],
    criterion: &ThermalizationCriterion,
) -> Result<DecayTrace> {
    if traces.is_empty() {
        return Err(PipelineError::NoThermalizedTraces);
    }
    let reference = median(&mut traces.iter().map(|t| t.temperature).collect::<Vec<_>>());
    let kept: Vec<&DecayTrace> = traces
        .iter()
        .filter(|t| criterion.accepts(t.temperature, reference))
        .collect();
    let Some(&base) = kept.first() else {
        return Err(PipelineError::NoThermalizedTraces);
    };
    if kept.len() == 1 {
        return Ok(base.clone());
    }

    let grid = base.samples();
    let mut averaged = Vec::with_capacity(grid.len());
    'grid: for (i, &(t, _)) in grid.iter().enumerate() {
        let mut sum = 0.0;
        for tr in &kept {
            let s = tr.samples();
            let same_grid = s.len() == grid.len() && s[i].0 == t;
            let p = if same_grid { Some(s[i].1) } else { interpolate(s, t) };
            match p {
                Some(p) => sum += p,
                None => continue 'grid,
            }
        }
        averaged.push((t, sum / kept.len() as f64));
    }
    if averaged.is_empty() {
        return Err(PipelineError::NoOverlap);
    }

    let count = kept.len() as f64;
    let mut out = DecayTrace::new(
        averaged,
        kept.iter().map(|t| t.f0).sum::<f64>() / count,
        kept.iter().map(|t| t.temperature).sum::<f64>() / count,
        base.label.clone(),
    )?;
    let spread = kept.iter().map(|t| t.f0_err.powi(2)).sum::<f64>().sqrt() / count;
    out.f0_err = spread;
    out.n_averaged = kept.iter().map(|t| t.n_averaged).sum();
    Ok(out)
}
