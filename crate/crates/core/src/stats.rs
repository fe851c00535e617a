//! Small numeric helpers shared across modules.

use serde::{Deserialize, Serialize};

/// Logistic function.
pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of `p`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`), the default convention of most statistics packages.
///
/// `sorted` must be ascending and nonempty; `q` must lie in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi.min(n - 1)] - sorted[lo])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

/// Quantile of `values` where each value carries mass proportional to `mass`:
/// the smallest value whose cumulative mass share reaches `q`.
pub fn weighted_quantile(values: &[f64], mass: &[f64], q: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = mass.iter().sum();
    let mut cum = 0.0;
    for &i in &idx {
        cum += mass[i];
        if cum >= q * total {
            return values[i];
        }
    }
    values[*idx.last().expect("nonempty")]
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Distribution summary of a weight vector, in the column order of the
/// weight summary tables: N, Mean, Sd, Min, Max, IQR, CV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub iqr: f64,
    pub cv: f64,
}

impl WeightSummary {
    pub const HEADER: [&'static str; 7] = ["N", "Mean", "Sd", "Min", "Max", "IQR", "CV"];

    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, sd: f64::NAN, min: f64::NAN, max: f64::NAN, iqr: f64::NAN, cv: f64::NAN };
        }
        let m = mean(values);
        let sd =
            if n > 1 { (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            n,
            mean: m,
            sd,
            min: sorted[0],
            max: sorted[n - 1],
            iqr: quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
            cv: sd / m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_matches_hand_values() {
        let v = [1.0, 1.0, 1.0, 1.0, 96.0];
        // h = 3.2 -> 1 + 0.2 * 95
        assert!((quantile(&v, 0.8) - 20.0).abs() < 1e-12);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 96.0);
        assert!((quantile(&[1.0, 2.0, 3.0, 4.0], 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn summary_columns() {
        let s = WeightSummary::of(&[2.0, 4.0, 6.0]);
        assert_eq!(s.n, 3);
        assert!((s.mean - 4.0).abs() < 1e-15);
        assert!((s.sd - 2.0).abs() < 1e-15);
        assert!((s.iqr - 2.0).abs() < 1e-15);
        assert!((s.cv - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expit_is_stable() {
        assert_eq!(expit(-800.0), 0.0);
        assert_eq!(expit(800.0), 1.0);
        assert!((expit(logit(0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn weighted_quantile_uses_mass() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(weighted_quantile(&v, &[1.0, 1.0, 8.0], 0.5), 3.0);
        assert_eq!(weighted_quantile(&v, &[8.0, 1.0, 1.0], 0.5), 1.0);
    }
}
