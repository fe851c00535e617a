//! Weighted logistic regression (IRLS) and weighted least squares.

mod linear;
mod logit;
mod report;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use linear::{fit_weighted_linear, LinearFit};
pub use logit::{fit_weighted_logit, fit_weighted_logit_with, predict_prob, LogitFit, LogitOptions, PROB_CLIP};
pub use report::{render_logit_table, significance_stars};

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("response is constant; the model is not identified")]
    ConstantResponse,
    #[error("rank-deficient design; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("no convergence: coefficient of `{column}` diverges (complete or quasi-complete separation)")]
    Separation { column: String },
    #[error("no convergence after {iterations} iterations (max score {max_score:e})")]
    NonConvergence { iterations: usize, max_score: f64 },
}

/// A named numeric design matrix, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    data: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, GlmError> {
        let p = names.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(GlmError::Dimension(format!("row {i} has {} values for {p} columns", r.len())));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GlmError::Dimension("non-finite covariate value".into()));
        }
        let data = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Ok(Self { names, data })
    }

    /// Prepends an intercept column named [`INTERCEPT`].
    pub fn with_intercept(names: &[&str], rows: &[Vec<f64>]) -> Result<Self, GlmError> {
        let mut all = vec![INTERCEPT.to_string()];
        all.extend(names.iter().map(|s| s.to_string()));
        let rows: Vec<Vec<f64>> =
            rows.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
        Self::from_rows(all, &rows)
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<(), GlmError> {
    if w.len() != n {
        return Err(GlmError::Dimension(format!("{} weights for {n} rows", w.len())));
    }
    if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(GlmError::InvalidWeights(format!("weight {bad} is not positive and finite")));
    }
    Ok(())
}

/// Least-squares solution of `a x = b` through a Householder QR, with the
/// residual vector. `a` must have full column rank.
fn qr_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    let x = qr.r().solve_upper_triangular(&qtb)?;
    let resid = b - a * &x;
    Some((x, resid))
}

/// Columns of `a` that lie in the span of the preceding independent
/// columns, reported together with the columns they load on.
fn collinear_columns(a: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let mut independent: Vec<usize> = Vec::new();
    let mut flagged: Vec<usize> = Vec::new();
    for j in 0..a.ncols() {
        let col = a.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            flagged.push(j);
            continue;
        }
        if independent.is_empty() {
            independent.push(j);
            continue;
        }
        let sub = a.select_columns(&independent);
        let dependent = match qr_lstsq(&sub, &col) {
            Some((x, resid)) => {
                if resid.norm() <= 1e-9 * norm {
                    for (k, &c) in independent.iter().enumerate() {
                        if x[k].abs() > 1e-9 {
                            flagged.push(c);
                        }
                    }
                    true
                } else {
                    false
                }
            }
            None => true,
        };
        if dependent {
            flagged.push(j);
        } else {
            independent.push(j);
        }
    }
    flagged.sort_unstable();
    flagged.dedup();
    flagged.into_iter().map(|j| names[j].clone()).collect()
}

fn sqrt_weighted(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = x.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= w[i].sqrt();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_columns_are_named() {
        let x = DesignMatrix::with_intercept(
            &["a", "b", "c"],
            &[vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 1.0], vec![3.0, 6.0, 0.0], vec![4.0, 8.0, 1.0]],
        )
        .unwrap();
        let cols = collinear_columns(x.matrix(), x.names());
        assert_eq!(cols, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(DesignMatrix::from_rows(vec!["a".into()], &[vec![1.0, 2.0]]).is_err());
    }
}
