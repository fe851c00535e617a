use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_weights, collinear_columns, sqrt_weighted, DesignMatrix, GlmError};
use crate::stats::expit;

/// Predicted probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute score component.
    pub tol: f64,
    /// Ridge penalty; zero disables it. `1e-6` is the usual value when set.
    pub ridge: f64,
    /// A coefficient beyond this magnitude while the likelihood still rises is
    /// reported as separation.
    pub separation_bound: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        Self { max_iter: 50, tol: 1e-8, ridge: 0.0, separation_bound: 15.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Model-based standard errors from the inverse information matrix.
    pub std_errors: Vec<f64>,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub n_iter: usize,
    pub max_score: f64,
}

impl LogitFit {
    pub fn aic(&self) -> f64 {
        2.0 * self.coefficients.len() as f64 - 2.0 * self.log_likelihood
    }

    /// Two-sided normal-approximation p-values.
    pub fn p_values(&self) -> Vec<f64> {
        let normal = Normal::standard();
        self.coefficients.iter().zip(&self.std_errors).map(|(b, se)| 2.0 * (1.0 - normal.cdf((b / se).abs()))).collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|k| self.coefficients[k])
    }
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &[f64], w: &[f64], beta: &DVector<f64>, ridge: f64) -> f64 {
    let eta = x * beta;
    let ll: f64 = eta.iter().zip(y).zip(w).map(|((e, yi), wi)| wi * (yi * e - softplus(*e))).sum();
    ll - 0.5 * ridge * beta.norm_squared()
}

/// Score vector and information matrix at `beta`.
fn derivatives(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    beta: &DVector<f64>,
    ridge: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let eta = x * beta;
    let p = x.ncols();
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    for i in 0..x.nrows() {
        let mu = expit(eta[i]);
        let xi = x.row(i).transpose();
        score.axpy(w[i] * (y[i] - mu), &xi, 1.0);
        info.ger(w[i] * mu * (1.0 - mu), &xi, &xi, 1.0);
    }
    if ridge > 0.0 {
        score.axpy(-ridge, beta, 1.0);
        for k in 0..p {
            info[(k, k)] += ridge;
        }
    }
    (score, info)
}

pub fn fit_weighted_logit(x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<LogitFit, GlmError> {
    fit_weighted_logit_with(x, y, w, &LogitOptions::default())
}

/// Maximizes the weighted Bernoulli log-likelihood by Newton-Raphson (IRLS)
/// with step-halving, starting from zero.
pub fn fit_weighted_logit_with(
    x: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    opts: &LogitOptions,
) -> Result<LogitFit, GlmError> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(GlmError::Dimension(format!("{} responses for {n} rows", y.len())));
    }
    check_weights(w, n)?;
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(GlmError::Dimension("responses must lie in [0, 1]".into()));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(GlmError::ConstantResponse);
    }
    let xm = x.matrix();
    if opts.ridge == 0.0 {
        let dependent = collinear_columns(&sqrt_weighted(xm, w), x.names());
        if !dependent.is_empty() || n < p {
            return Err(GlmError::RankDeficient { columns: dependent });
        }
    }
    let w_total: f64 = w.iter().sum();
    let noise_floor = 1e-14 * w_total;

    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(xm, y, w, &beta, opts.ridge);
    let mut converged = false;
    let mut n_iter = 0;
    let mut max_score = f64::INFINITY;

    while n_iter < opts.max_iter {
        let (score, info) = derivatives(xm, y, w, &beta, opts.ridge);
        max_score = score.amax();
        let chol = info
            .cholesky()
            .ok_or_else(|| GlmError::RankDeficient { columns: collinear_columns(&sqrt_weighted(xm, w), x.names()) })?;
        let delta = chol.solve(&score);
        if max_score < opts.tol || max_score < noise_floor {
            // One more Newton step pins the optimum to machine precision so
            // fits agree across rescaled weights.
            let cand = &beta + &delta;
            let ll_c = log_likelihood(xm, y, w, &cand, opts.ridge);
            if ll_c >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = cand;
            }
            converged = true;
            break;
        }
        n_iter += 1;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + t * &delta;
            let ll_c = log_likelihood(xm, y, w, &cand, opts.ridge);
            if ll_c.is_finite() && ll_c >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some((cand, ll_c));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ll_c)) = accepted else {
            break;
        };
        let k = cand.iamax();
        if cand[k].abs() > opts.separation_bound && ll_c > ll {
            return Err(GlmError::Separation { column: x.names()[k].clone() });
        }
        beta = cand;
        ll = ll_c;
    }
    let (score, info) = derivatives(xm, y, w, &beta, opts.ridge);
    if !converged {
        return Err(GlmError::NonConvergence { iterations: n_iter, max_score: score.amax().min(max_score) });
    }
    let cov =
        info.cholesky().ok_or_else(|| GlmError::RankDeficient { columns: collinear_columns(xm, x.names()) })?.inverse();
    Ok(LogitFit {
        names: x.names().to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors: (0..p).map(|k| cov[(k, k)].sqrt()).collect(),
        log_likelihood: log_likelihood(xm, y, w, &beta, 0.0),
        n_obs: n,
        converged,
        n_iter,
        max_score: score.amax(),
    })
}

/// Inverse logit of the linear predictor, clipped to `[PROB_CLIP, 1 - PROB_CLIP]`.
pub fn predict_prob(fit: &LogitFit, x: &DesignMatrix) -> Result<Vec<f64>, GlmError> {
    if x.ncols() != fit.coefficients.len() {
        return Err(GlmError::Dimension(format!("{} columns for {} coefficients", x.ncols(), fit.coefficients.len())));
    }
    let beta = DVector::from_column_slice(&fit.coefficients);
    Ok((x.matrix() * beta).iter().map(|e| expit(*e).clamp(PROB_CLIP, 1.0 - PROB_CLIP)).collect())
}
