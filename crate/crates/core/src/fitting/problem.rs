use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::layout::ParamLayout;
use super::lm::{self, LeastSquares, LmOptions};
use super::{FitConfig, FitError, FitResult, Result, WeightMode};
use crate::model::{sensitivity_model, MaterialParams, PinningParams};
use crate::pipeline::SensitivityCurve;

/// Eigenvalue ratio of the column-normalised normal matrix below which the
/// fit is declared rank-deficient (condition number of `J` above 10⁶).
const RANK_TOLERANCE: f64 = 1e-12;

fn check_curves(curves: &[SensitivityCurve], weight: WeightMode, mp: &MaterialParams) -> Result<()> {
    if curves.is_empty() {
        return Err(FitError::Config("no sensitivity curves".into()));
    }
    for c in curves {
        if c.is_empty() {
            return Err(FitError::EmptyCurve(c.cooldown_id.clone()));
        }
        for (i, p) in c.points.iter().enumerate() {
            // Surfaces temperature-domain errors before the solver starts.
            crate::model::bc2(p.temperature_k, mp)?;
            let bad = |s: f64| !(s.is_finite() && s > 0.0);
            if weight == WeightMode::InverseVariance && (bad(p.s_err) || bad(p.s_prime_err)) {
                return Err(FitError::ZeroSigma {
                    curve: c.cooldown_id.clone(),
                    point: i,
                });
            }
        }
    }
    Ok(())
}

fn curve_residuals(
    curve: &SensitivityCurve,
    params: &PinningParams,
    mp: &MaterialParams,
    weight: WeightMode,
    out: &mut Vec<f64>,
) -> Result<()> {
    let omega = mp.omega();
    let n = curve.points.len();
    let start = out.len();
    out.resize(start + 2 * n, 0.0);
    for (i, p) in curve.points.iter().enumerate() {
        let m = sensitivity_model(p.temperature_k, omega, mp, params)?;
        let (ws, wsp) = match weight {
            WeightMode::InverseVariance => (p.s_err, p.s_prime_err),
            WeightMode::Unit => (1.0, 1.0),
        };
        out[start + i] = (p.s - m.s) / ws;
        out[start + n + i] = (p.s_prime - m.s_prime) / wsp;
    }
    Ok(())
}

/// Stacked weighted residuals: for each curve, its `S` block followed by its
/// `S'` block. `params[k]` holds dataset `k`'s pinning parameters.
pub fn residual_vector(
    params: &[PinningParams],
    curves: &[SensitivityCurve],
    mp: &MaterialParams,
    cfg: &FitConfig,
) -> Result<Vec<f64>> {
    if params.len() != curves.len() {
        return Err(FitError::Config(format!(
            "{} parameter sets for {} curves",
            params.len(),
            curves.len()
        )));
    }
    check_curves(curves, cfg.weight, mp)?;
    let mut out = Vec::with_capacity(curves.iter().map(|c| 2 * c.len()).sum());
    for (c, p) in curves.iter().zip(params) {
        curve_residuals(c, p, mp, cfg.weight, &mut out)?;
    }
    Ok(out)
}

struct Problem<'a> {
    curves: &'a [SensitivityCurve],
    mp: &'a MaterialParams,
    layout: &'a ParamLayout,
    weight: WeightMode,
    n_residuals: usize,
}

impl LeastSquares for Problem<'_> {
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = Vec::with_capacity(self.n_residuals);
        for (k, c) in self.curves.iter().enumerate() {
            let p = self.layout.dataset_params(x.as_slice(), k);
            curve_residuals(c, &p, self.mp, self.weight, &mut out)?;
        }
        Ok(DVector::from_vec(out))
    }
}

/// Parameters whose components dominate the near-null direction.
fn null_direction_names(v: &DVector<f64>, names: &[String]) -> Vec<String> {
    let max = v.amax();
    v.iter()
        .zip(names)
        .filter(|(c, _)| c.abs() >= 0.3 * max)
        .map(|(_, n)| n.clone())
        .collect()
}

fn check_rank(jac: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let jtj = jac.transpose() * jac;
    let p = jtj.nrows();
    let d: Vec<f64> = jtj.diagonal().iter().map(|v| v.sqrt()).collect();
    let dead: Vec<String> = d
        .iter()
        .zip(names)
        .filter(|(v, _)| !(**v > 0.0))
        .map(|(_, n)| n.clone())
        .collect();
    if !dead.is_empty() {
        return Err(FitError::RankDeficient {
            parameters: dead,
            detail: "residuals do not depend on these parameters".into(),
        });
    }
    let corr = DMatrix::from_fn(p, p, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let eig = SymmetricEigen::new(corr);
    let (imin, min) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    let max = eig.eigenvalues.max();
    if min <= RANK_TOLERANCE * max {
        let v = eig.eigenvectors.column(imin).into_owned();
        return Err(FitError::RankDeficient {
            parameters: null_direction_names(&v, names),
            detail: format!("normal-matrix eigenvalue ratio {:.3e}", min / max),
        });
    }
    Ok(())
}

/// Simultaneous fit of all curves with the sharing pattern in `cfg`.
///
/// Returns a result flagged `converged = false` when the iteration cap is
/// hit. Fails when the data cannot determine every free parameter.
pub fn fit_simultaneous(
    curves: &[SensitivityCurve],
    mp: &MaterialParams,
    cfg: &FitConfig,
) -> Result<FitResult> {
    mp.validate()?;
    let layout = ParamLayout::new(cfg, curves.len(), mp.omega())?;
    check_curves(curves, cfg.weight, mp)?;
    let n_points: usize = curves.iter().map(|c| c.len()).sum();
    let n_residuals = 2 * n_points;
    let n_free = layout.n_free();
    if n_residuals < n_free + 1 {
        return Err(FitError::RankDeficient {
            parameters: layout.names().to_vec(),
            detail: format!("{n_residuals} residuals for {n_free} free parameters"),
        });
    }

    let problem = Problem {
        curves,
        mp,
        layout: &layout,
        weight: cfg.weight,
        n_residuals,
    };
    let opts = LmOptions {
        xtol: cfg.xtol,
        gtol: cfg.gtol,
        ftol: cfg.ftol,
        max_iterations: cfg.max_iterations,
        fd_step: cfg.fd_step,
        lower: DVector::from_column_slice(layout.lower()),
        upper: DVector::from_column_slice(layout.upper()),
    };
    let out = lm::minimize(&problem, &DVector::from_column_slice(layout.initial()), &opts)?;
    check_rank(&out.jacobian, layout.names())?;

    let dof = (n_residuals - n_free) as f64;
    let chi2_reduced = out.cost / dof;
    let jtj = out.jacobian.transpose() * &out.jacobian;
    let inv = jtj
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| jtj.try_inverse())
        .ok_or_else(|| FitError::RankDeficient {
            parameters: layout.names().to_vec(),
            detail: "normal matrix not invertible".into(),
        })?;
    let x = out.x.as_slice();
    let scale = layout.linear_derivative(x);
    let cov = DMatrix::from_fn(n_free, n_free, |i, j| {
        inv[(i, j)] * chi2_reduced * scale[i] * scale[j]
    });
    // Symmetrise away round-off.
    let cov = (&cov + cov.transpose()) * 0.5;
    let uncertainties: Vec<f64> = (0..n_free).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();

    let dataset_params: Vec<PinningParams> =
        (0..curves.len()).map(|k| layout.dataset_params(x, k)).collect();
    let dataset_uncertainties = (0..curves.len())
        .map(|k| {
            let [a, b, c] = layout.dataset_indices(k).map(|i| i.map_or(0.0, |i| uncertainties[i]));
            PinningParams {
                omega0: a,
                alpha: b,
                f: c,
            }
        })
        .collect();

    let mut residuals = Vec::with_capacity(curves.len());
    let mut offset = 0;
    for c in curves {
        let len = 2 * c.len();
        residuals.push(out.residuals.as_slice()[offset..offset + len].to_vec());
        offset += len;
    }

    Ok(FitResult {
        parameter_names: layout.names().to_vec(),
        values: layout.to_linear(x),
        uncertainties,
        covariance: (0..n_free)
            .map(|i| (0..n_free).map(|j| cov[(i, j)]).collect())
            .collect(),
        dataset_params,
        dataset_uncertainties,
        chi2_reduced,
        n_points,
        n_residuals,
        residuals,
        n_iterations: out.iterations,
        converged: out.converged(),
        termination: out.termination,
        cost_history: out.cost_history,
    })
}

/// One point of a dense model curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    pub temperature_k: f64,
    pub s: f64,
    pub s_prime: f64,
}

/// Model `S(T)`, `S'(T)` on `t_grid` for each parameter set.
pub fn predict_curves(
    params: &[PinningParams],
    mp: &MaterialParams,
    t_grid: &[f64],
    omega: f64,
) -> Result<Vec<Vec<ModelPoint>>> {
    params
        .iter()
        .map(|p| {
            t_grid
                .iter()
                .map(|&t| {
                    let m = sensitivity_model(t, omega, mp, p)?;
                    Ok(ModelPoint {
                        temperature_k: t,
                        s: m.s,
                        s_prime: m.s_prime,
                    })
                })
                .collect()
        })
        .collect()
}

/// Forward- and central-difference Jacobians of the fit objective at the
/// optimum of `result`, in the solver's internal parameterisation.
pub fn jacobians_at(
    curves: &[SensitivityCurve],
    mp: &MaterialParams,
    cfg: &FitConfig,
    result: &FitResult,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let layout = ParamLayout::new(cfg, curves.len(), mp.omega())?;
    let x = layout.to_internal(&result.values);
    let x = DVector::from_vec(x);
    let problem = Problem {
        curves,
        mp,
        layout: &layout,
        weight: cfg.weight,
        n_residuals: curves.iter().map(|c| 2 * c.len()).sum(),
    };
    let r = problem.residuals(&x)?;
    let upper = DVector::from_column_slice(layout.upper());
    Ok((
        lm::forward_jacobian(&problem, &x, &r, cfg.fd_step, &upper)?,
        lm::central_jacobian(&problem, &x, 1e-5)?,
    ))
}
