use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{check_weights, collinear_columns, qr_lstsq, sqrt_weighted, DesignMatrix, GlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// `Σ w r² / (n - p)`; zero when there are no residual degrees of freedom.
    pub residual_variance: f64,
    /// Weighted R², `1 - Σ w r² / Σ w (y - ȳ_w)²`.
    pub r_squared: f64,
    pub n_obs: usize,
}

impl LinearFit {
    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>, GlmError> {
        if x.ncols() != self.coefficients.len() {
            return Err(GlmError::Dimension(format!(
                "{} columns for {} coefficients",
                x.ncols(),
                self.coefficients.len()
            )));
        }
        let beta = DVector::from_column_slice(&self.coefficients);
        Ok((x.matrix() * beta).iter().copied().collect())
    }
}

/// Weighted least squares through a Householder QR of `√W X`.
pub fn fit_weighted_linear(x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<LinearFit, GlmError> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(GlmError::Dimension(format!("{} responses for {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GlmError::Dimension("non-finite response".into()));
    }
    check_weights(w, n)?;
    let a = sqrt_weighted(x.matrix(), w);
    let dependent = collinear_columns(&a, x.names());
    if !dependent.is_empty() || n < p {
        return Err(GlmError::RankDeficient { columns: dependent });
    }
    let b = DVector::from_iterator(n, y.iter().zip(w).map(|(yi, wi)| yi * wi.sqrt()));
    let (beta, resid) = qr_lstsq(&a, &b).ok_or_else(|| GlmError::RankDeficient { columns: x.names().to_vec() })?;
    let rss = resid.norm_squared();
    let w_total: f64 = w.iter().sum();
    let ybar = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w_total;
    let tss: f64 = y.iter().zip(w).map(|(yi, wi)| wi * (yi - ybar).powi(2)).sum();
    let r_squared = if tss > 0.0 {
        1.0 - rss / tss
    } else if rss == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(LinearFit {
        names: x.names().to_vec(),
        coefficients: beta.iter().copied().collect(),
        residual_variance: if n > p { rss / (n - p) as f64 } else { 0.0 },
        r_squared,
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line_has_zero_residual() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| 3.0 - 2.0 * i as f64).collect();
        let x = DesignMatrix::with_intercept(&["t"], &rows).unwrap();
        let fit = fit_weighted_linear(&x, &y, &[1.0, 2.0, 1.0, 3.0, 1.0, 1.0]).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 2.0).abs() < 1e-12);
        assert!(fit.residual_variance < 1e-24);
    }

    #[test]
    fn constant_response() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let x = DesignMatrix::with_intercept(&["a", "b"], &rows).unwrap();
        let fit = fit_weighted_linear(&x, &[4.0; 5], &[1.0, 0.5, 2.0, 1.0, 1.0]).unwrap();
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-12);
        assert!(fit.coefficients[1..].iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn matches_normal_equations_by_hand() {
        // x = 0..4, y = [1, 3, 2, 5, 4], w = [1, 2, 1, 2, 1]
        // Σw = 7, Σwx = 14, Σwx² = 40, Σwy = 23, Σwxy = 56
        // [7 14; 14 40] β = [23; 56], det = 84, β = [(40·23 − 14·56)/84, (7·56 − 14·23)/84]
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let x = DesignMatrix::with_intercept(&["x"], &rows).unwrap();
        let fit = fit_weighted_linear(&x, &[1.0, 3.0, 2.0, 5.0, 4.0], &[1.0, 2.0, 1.0, 2.0, 1.0]).unwrap();
        assert!((fit.coefficients[0] - 136.0 / 84.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 70.0 / 84.0).abs() < 1e-10);
    }

    #[test]
    fn rank_deficiency_lists_columns() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 1.0 - i as f64]).collect();
        let x = DesignMatrix::with_intercept(&["u", "v"], &rows).unwrap();
        match fit_weighted_linear(&x, &[1.0; 6], &[1.0; 6]) {
            Err(GlmError::RankDeficient { columns }) => assert_eq!(columns, vec!["(Intercept)", "u", "v"]),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn residuals_orthogonal(
            data in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -10.0f64..10.0, 0.1f64..5.0), 8..40)
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|d| vec![d.0, d.1]).collect();
            let y: Vec<f64> = data.iter().map(|d| d.2).collect();
            let w: Vec<f64> = data.iter().map(|d| d.3).collect();
            let x = DesignMatrix::with_intercept(&["a", "b"], &rows).unwrap();
            if let Ok(fit) = fit_weighted_linear(&x, &y, &w) {
                let yhat = fit.predict(&x).unwrap();
                let scale: f64 = y.iter().zip(&w).map(|(a, b)| b * a.abs()).sum::<f64>().max(1.0);
                for k in 0..3 {
                    let s: f64 = (0..y.len()).map(|i| w[i] * (y[i] - yhat[i]) * x.matrix()[(i, k)]).sum();
                    prop_assert!(s.abs() <= 1e-10 * scale, "column {} inner product {}", k, s);
                }
                prop_assert!(fit.residual_variance >= 0.0);
            }
        }
    }
}
