//! Nonlinear least squares for the model families used across the toolkit.
//!
//! The optimizer is Levenberg–Marquardt on bound-free internal parameters
//! (log for positive quantities, logit for intervals) with a forward
//! finite-difference Jacobian.

mod guess;
mod models;

pub use guess::estimate_initial_guess;
pub use models::{model_eval, FitModel, MAX_EXPONENT};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative finite-difference step for the Jacobian.
const FD_STEP: f64 = 1e-6;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
/// Convergence threshold on the scaled gradient.
pub const GRADIENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative residual-change tolerance.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    /// One-sigma errors from `RSS/(n-k)·(JᵀJ)⁻¹`; NaN when `n == k`.
    pub std_errors: Vec<f64>,
    /// Row-major covariance of the parameters; the square roots of its
    /// diagonal are `std_errors`.
    pub covariance: Vec<Vec<f64>>,
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest cosine between the residual vector and a Jacobian column at
    /// the solution; zero at an exact stationary point.
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.model
            .param_names()
            .iter()
            .position(|n| *n == name)
            .map(|k| self.params[k])
    }
}

fn check_data(model: FitModel, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "x has {} points but y has {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < model.n_params() {
        return Err(Error::invalid(format!(
            "{} needs at least {} points, got {}",
            model,
            model.n_params(),
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("fit data must be finite"));
    }
    Ok(())
}

struct Problem<'a> {
    model: FitModel,
    x: &'a [f64],
    y: &'a [f64],
}

impl Problem<'_> {
    fn residuals(&self, u: &[f64]) -> DVector<f64> {
        let p = self.model.from_internal(u);
        DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.y)
                .map(|(&xi, &yi)| yi - self.model.eval_unchecked(&p, xi)),
        )
    }

    /// Jacobian of the model (not the residual) with respect to `u`.
    fn jacobian(&self, u: &[f64], r0: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.x.len(), u.len());
        let mut shifted = u.to_vec();
        for k in 0..u.len() {
            let h = FD_STEP * u[k].abs().max(1.0);
            shifted[k] = u[k] + h;
            let r = self.residuals(&shifted);
            shifted[k] = u[k];
            j.set_column(k, &((r0 - r) / h));
        }
        j
    }
}

fn rss_of(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

fn scaled_gradient(j: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    j.column_iter()
        .map(|c| {
            let cn = c.norm();
            if cn == 0.0 {
                0.0
            } else {
                c.dot(r).abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Fits `model` to `(x, y)` from `initial_guess`.
///
/// Returns `DegenerateFit` when some parameter has no influence on the model
/// at the start or the solution. Hitting `max_iter` is not an error; the
/// result then carries `converged = false`.
pub fn fit(
    model: FitModel,
    x: &[f64],
    y: &[f64],
    initial_guess: &[f64],
    options: &FitOptions,
) -> Result<FitResult> {
    check_data(model, x, y)?;
    model.check_params(initial_guess)?;
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::invalid("fit options need tol > 0 and max_iter >= 1"));
    }
    let problem = Problem { model, x, y };
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);

    let mut u = model.to_internal(initial_guess);
    let mut r = problem.residuals(&u);
    let mut rss = rss_of(&r);
    let mut j = problem.jacobian(&u, &r);
    check_columns(model, &j, "initial guess")?;
    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;
        if rss <= 1e-30 * scale || scaled_gradient(&j, &r) < GRADIENT_TOL {
            converged = true;
            break;
        }
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        while lambda < LAMBDA_MAX {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(f64::MIN_POSITIVE);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&g);
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = problem.residuals(&trial);
            let rss_trial = rss_of(&r_trial);
            if rss_trial.is_finite() && rss_trial < rss {
                let rel = (rss - rss_trial) / rss;
                u = trial;
                r = r_trial;
                rss = rss_trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < options.tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: a numerical minimum.
            converged = true;
            break;
        }
        j = problem.jacobian(&u, &r);
        if converged {
            break;
        }
    }

    let mut params = model.from_internal(&u);
    let mut covariance = covariance(&problem, &u, &r, rss)?;
    if model == FitModel::TripleExponential {
        canonicalize_triple(&mut params, &mut covariance);
    }
    let std_errors = (0..params.len())
        .map(|c| covariance[c][c].max(0.0).sqrt())
        .collect();
    log::debug!("{model} fit: rss={rss:.3e} iterations={iterations} converged={converged}");
    Ok(FitResult {
        model,
        params,
        std_errors,
        covariance,
        rss,
        converged,
        iterations,
        gradient_norm: scaled_gradient(&j, &r),
    })
}

fn check_columns(model: FitModel, j: &DMatrix<f64>, at: &str) -> Result<()> {
    for (k, c) in j.column_iter().enumerate() {
        if c.iter().all(|v| *v == 0.0) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateFit(format!(
                "parameter {} of {model} has no finite effect on the model at the {at}",
                model.param_names()[k]
            )));
        }
    }
    Ok(())
}

/// Covariance of the external parameters: `RSS/(n-k)·(JᵀJ)⁻¹` in the
/// internal coordinates, carried over by the Jacobian of the
/// internal-to-external map. All NaN when `n == k`.
fn covariance(problem: &Problem, u: &[f64], r: &DVector<f64>, rss: f64) -> Result<Vec<Vec<f64>>> {
    let (n, k) = (problem.x.len(), u.len());
    let mut j = problem.jacobian(u, r);
    check_columns(problem.model, &j, "solution")?;
    // Column scaling keeps the normal matrix well conditioned when the
    // parameters differ by many orders of magnitude.
    let norms: Vec<f64> = j.column_iter().map(|c| c.norm()).collect();
    for (c, nrm) in norms.iter().enumerate() {
        j.column_mut(c).unscale_mut(*nrm);
    }
    let scaled_inv = (j.transpose() * &j).try_inverse().ok_or_else(|| {
        Error::DegenerateFit(format!(
            "{} normal matrix is singular at the solution",
            problem.model
        ))
    })?;
    if n == k {
        return Ok(vec![vec![f64::NAN; k]; k]);
    }
    let s2 = rss / (n - k) as f64;
    let cov_u = DMatrix::from_fn(k, k, |a, b| s2 * scaled_inv[(a, b)] / (norms[a] * norms[b]));
    let g = problem.model.external_jacobian(u);
    let cov_p = &g * cov_u * g.transpose();
    // symmetrize away rounding from the triple product
    Ok((0..k)
        .map(|a| {
            (0..k)
                .map(|b| 0.5 * (cov_p[(a, b)] + cov_p[(b, a)]))
                .collect()
        })
        .collect())
}

/// Orders the three components by lifetime, permuting the covariance to
/// match.
fn canonicalize_triple(params: &mut [f64], cov: &mut [Vec<f64>]) {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| params[2 * a + 1].total_cmp(&params[2 * b + 1]));
    // new index -> old index
    let src: Vec<usize> = order.iter().flat_map(|&c| [2 * c, 2 * c + 1]).collect();
    let (p, c) = (params.to_vec(), cov.to_vec());
    for (dst, &s) in src.iter().enumerate() {
        params[dst] = p[s];
        for (dst2, &s2) in src.iter().enumerate() {
            cov[dst][dst2] = c[s][s2];
        }
    }
}

/// Initial guess followed by a fit. Triple exponentials are started from
/// several lifetime spreads and the lowest residual wins, since close
/// lifetimes make the landscape multimodal.
pub fn fit_auto(model: FitModel, x: &[f64], y: &[f64], options: &FitOptions) -> Result<FitResult> {
    let guess = estimate_initial_guess(model, x, y)?;
    let mut best = fit(model, x, y, &guess, options);
    if model == FitModel::TripleExponential {
        // a failed start is only reported when every other start fails too
        for start in guess::triple_exponential_starts(x, y) {
            if let Ok(r) = fit(model, x, y, &start, options) {
                let better = match &best {
                    Ok(b) => (r.converged, -r.rss) > (b.converged, -b.rss),
                    Err(_) => true,
                };
                if better {
                    best = Ok(r);
                }
            }
        }
    }
    best
}
