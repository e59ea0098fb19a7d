//! Box-constrained Levenberg-Marquardt with forward-difference Jacobians.
//!
//! Damping is Marquardt-scaled (`λ·diag(JᵀJ)`) and every convergence test is
//! relative, so a common rescaling of the residuals leaves the iterate
//! sequence unchanged.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FitError, Result};

pub trait LeastSquares {
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub xtol: f64,
    pub gtol: f64,
    pub ftol: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every Jacobian column is orthogonal to the residual within `gtol`.
    Gradient,
    /// Relative parameter step below `xtol`.
    Step,
    /// Relative cost reduction below `ftol`.
    Cost,
    /// Residual vector is exactly zero.
    ZeroResidual,
    /// No step reduces the cost even at maximal damping.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: DVector<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub cost_history: Vec<f64>,
}

impl LmOutcome {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

fn clamp(x: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn checked(r: DVector<f64>) -> Result<DVector<f64>> {
    if r.iter().all(|v| v.is_finite()) {
        Ok(r)
    } else {
        Err(FitError::NonFinite)
    }
}

/// Forward-difference Jacobian; steps backwards where the forward point
/// would leave the box.
pub fn forward_jacobian<P: LeastSquares + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    r: &DVector<f64>,
    step: f64,
    upper: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(r.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let mut h = step * x[j].abs().max(1.0);
        if x[j] + h > upper[j] {
            h = -h;
        }
        xp[j] = x[j] + h;
        let h_eff = xp[j] - x[j];
        let rp = checked(problem.residuals(&xp)?)?;
        jac.set_column(j, &((rp - r) / h_eff));
        xp[j] = x[j];
    }
    Ok(jac)
}

/// Central-difference Jacobian, used for cross-checking.
pub fn central_jacobian<P: LeastSquares + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    let r0 = problem.residuals(x)?;
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let rp = problem.residuals(&xp)?;
        xp[j] = x[j] - h;
        let rm = problem.residuals(&xp)?;
        xp[j] = x[j];
        jac.set_column(j, &((rp - rm) / (2.0 * h)));
    }
    Ok(jac)
}

fn gradient_cosine(jac: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    jac.column_iter()
        .map(|c| {
            let cn = c.norm();
            if cn == 0.0 {
                0.0
            } else {
                (c.dot(r) / (cn * rn)).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn minimize<P: LeastSquares + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    opts: &LmOptions,
) -> Result<LmOutcome> {
    let mut x = x0.clone();
    clamp(&mut x, &opts.lower, &opts.upper);
    let mut r = checked(problem.residuals(&x)?)?;
    let mut cost = r.norm_squared();
    let mut jac = forward_jacobian(problem, &x, &r, opts.fd_step, &opts.upper)?;
    let mut history = vec![cost];
    let mut lambda = LAMBDA_INIT;
    let mut iterations = 0;

    let termination = loop {
        if cost == 0.0 {
            break Termination::ZeroResidual;
        }
        if gradient_cosine(&jac, &r) <= opts.gtol {
            break Termination::Gradient;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let diag_max = jtj.diagonal().max();
        let floor = if diag_max > 0.0 { diag_max * 1e-15 } else { 1.0 };

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(floor);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let mut x_new = &x + &delta;
            clamp(&mut x_new, &opts.lower, &opts.upper);
            let step = &x_new - &x;
            if step.iter().all(|&s| s == 0.0) {
                lambda *= 10.0;
                continue;
            }
            let r_new = match problem.residuals(&x_new) {
                Ok(v) if v.iter().all(|e| e.is_finite()) => v,
                Ok(_) => {
                    lambda *= 10.0;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let cost_new = r_new.norm_squared();
            if cost_new < cost {
                let reduction = (cost - cost_new) / cost;
                let small_step = step.norm() <= opts.xtol * (x.norm() + opts.xtol);
                x = x_new;
                r = r_new;
                cost = cost_new;
                history.push(cost);
                jac = forward_jacobian(problem, &x, &r, opts.fd_step, &opts.upper)?;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small_step {
                    return Ok(LmOutcome {
                        x,
                        residuals: r,
                        jacobian: jac,
                        cost,
                        iterations,
                        termination: Termination::Step,
                        cost_history: history,
                    });
                }
                if reduction <= opts.ftol {
                    return Ok(LmOutcome {
                        x,
                        residuals: r,
                        jacobian: jac,
                        cost,
                        iterations,
                        termination: Termination::Cost,
                        cost_history: history,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break Termination::Stalled;
        }
    };

    Ok(LmOutcome {
        x,
        residuals: r,
        jacobian: jac,
        cost,
        iterations,
        termination,
        cost_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y = a·exp(b·t) sampled exactly.
    struct ExpFit {
        t: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquares for ExpFit {
        fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_iterator(
                self.t.len(),
                self.t.iter().zip(&self.y).map(|(t, y)| y - x[0] * (x[1] * t).exp()),
            ))
        }
    }

    fn opts(n: usize) -> LmOptions {
        LmOptions {
            xtol: 1e-12,
            gtol: 1e-12,
            ftol: 1e-14,
            max_iterations: 200,
            fd_step: f64::EPSILON.sqrt(),
            lower: DVector::from_element(n, -1e6),
            upper: DVector::from_element(n, 1e6),
        }
    }

    fn problem() -> ExpFit {
        let t: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y = t.iter().map(|t| 2.5 * (-0.7 * t).exp()).collect();
        ExpFit { t, y }
    }

    #[test]
    fn recovers_exponential() {
        let out = minimize(&problem(), &DVector::from_vec(vec![1.0, 0.0]), &opts(2)).unwrap();
        assert!(out.converged());
        assert!((out.x[0] - 2.5).abs() < 1e-7, "{}", out.x[0]);
        assert!((out.x[1] + 0.7).abs() < 1e-7);
        for w in out.cost_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn respects_box() {
        let mut o = opts(2);
        o.upper[0] = 2.0;
        let out = minimize(&problem(), &DVector::from_vec(vec![1.0, 0.0]), &o).unwrap();
        assert!(out.x[0] <= 2.0);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut o = opts(2);
        o.max_iterations = 1;
        let out = minimize(&problem(), &DVector::from_vec(vec![1.0, 0.0]), &o).unwrap();
        assert_eq!(out.termination, Termination::MaxIterations);
        assert!(!out.converged());
    }

    #[test]
    fn forward_and_central_jacobians_agree() {
        let p = problem();
        let x = DVector::from_vec(vec![2.0, -0.5]);
        let r = p.residuals(&x).unwrap();
        let jf = forward_jacobian(&p, &x, &r, 1e-7, &DVector::from_element(2, 1e6)).unwrap();
        let jc = central_jacobian(&p, &x, 1e-5).unwrap();
        for (a, b) in jf.iter().zip(jc.iter()) {
            if b.abs() > 1e-8 {
                assert!(((a - b) / b).abs() < 1e-5);
            }
        }
    }
}
