use serde::{Deserialize, Serialize};

use super::{AdjustError, Stage, Transform, WeightVector};
use crate::stats::{quantile, weighted_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileRule {
    /// Type-7 quantiles of the weight values.
    #[default]
    Unweighted,
    /// Quantiles where each weight counts with its own mass.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Redistribution {
    /// The same amount added to every untrimmed weight.
    #[default]
    Equal,
    /// Amounts proportional to the untrimmed weights.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrimOptions {
    pub quantile: QuantileRule,
    pub redistribution: Redistribution,
    pub max_passes: usize,
}

impl Default for TrimOptions {
    fn default() -> Self {
        Self { quantile: QuantileRule::Unweighted, redistribution: Redistribution::Equal, max_passes: 10 }
    }
}

/// Caps weights at the `lower_q` and `upper_q` quantiles of the input and
/// hands the net trimmed mass to the untrimmed weights so the total is
/// unchanged. `None` leaves that tail alone.
pub fn trim_weights(
    w: &WeightVector,
    lower_q: Option<f64>,
    upper_q: Option<f64>,
    opts: &TrimOptions,
) -> Result<WeightVector, AdjustError> {
    let lq = lower_q.unwrap_or(0.0);
    let uq = upper_q.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&lq) || !(0.0..=1.0).contains(&uq) || lq >= uq {
        return Err(AdjustError::Argument(format!("need 0 <= lower_q < upper_q <= 1, got {lq} and {uq}")));
    }
    if w.len() < 3 {
        return Err(AdjustError::Argument(format!("trimming needs at least 3 weights, got {}", w.len())));
    }
    let q = |p: f64| match opts.quantile {
        QuantileRule::Unweighted => quantile(w.values(), p),
        QuantileRule::Weighted => weighted_quantile(w.values(), w.values(), p),
    };
    let lower = lower_q.map_or(f64::NEG_INFINITY, q);
    let upper = upper_q.map_or(f64::INFINITY, q);
    let (values, n_capped, passes) = cap_and_redistribute(w.values(), lower, upper, opts)?;
    w.derive(values, Stage::Trimmed, Transform::Trim { lower_q, upper_q, lower, upper, n_capped, passes })
}

/// Trims against fixed caps. Applying it twice with the same caps is a no-op
/// the second time.
pub fn trim_to_bounds(
    w: &WeightVector,
    lower: f64,
    upper: f64,
    opts: &TrimOptions,
) -> Result<WeightVector, AdjustError> {
    if lower > upper || lower.is_nan() || upper.is_nan() {
        return Err(AdjustError::Argument(format!("bounds [{lower}, {upper}] are not ordered")));
    }
    let (values, n_capped, passes) = cap_and_redistribute(w.values(), lower, upper, opts)?;
    w.derive(values, Stage::Trimmed, Transform::Trim { lower_q: None, upper_q: None, lower, upper, n_capped, passes })
}

fn cap_and_redistribute(
    input: &[f64],
    lower: f64,
    upper: f64,
    opts: &TrimOptions,
) -> Result<(Vec<f64>, usize, usize), AdjustError> {
    let total: f64 = input.iter().sum();
    let n = input.len() as f64;
    if n * lower > total * (1.0 + 1e-12) || n * upper < total * (1.0 - 1e-12) {
        return Err(AdjustError::AllTrimmed { lower, upper });
    }
    let mut vals = input.to_vec();
    let mut capped = vec![false; vals.len()];
    for pass in 1..=opts.max_passes {
        let mut changed = false;
        for (v, c) in vals.iter_mut().zip(capped.iter_mut()) {
            if *v > upper {
                *v = upper;
                *c = true;
                changed = true;
            } else if *v < lower {
                *v = lower;
                *c = true;
                changed = true;
            }
        }
        if !changed {
            return Ok((vals, capped.iter().filter(|c| **c).count(), pass - 1));
        }
        let mass = total - vals.iter().sum::<f64>();
        let free: Vec<usize> = (0..vals.len()).filter(|&i| !capped[i]).collect();
        if free.is_empty() {
            if mass.abs() <= 1e-12 * total {
                return Ok((vals, capped.len(), pass));
            }
            // A weight capped early on one side would have been pulled back
            // by later passes; solve for the settled state directly.
            return settle(input, lower, upper, total, opts.redistribution, pass);
        }
        match opts.redistribution {
            Redistribution::Equal => {
                let add = mass / free.len() as f64;
                for &i in &free {
                    vals[i] += add;
                }
            }
            Redistribution::Proportional => {
                let base: f64 = free.iter().map(|&i| vals[i]).sum();
                for &i in &free {
                    vals[i] += mass * vals[i] / base;
                }
            }
        }
    }
    if vals.iter().all(|v| *v <= upper && *v >= lower) {
        return Ok((vals, capped.iter().filter(|c| **c).count(), opts.max_passes));
    }
    settle(input, lower, upper, total, opts.redistribution, opts.max_passes)
}

/// The fixed point of cap-and-redistribute: every weight is
/// `clamp(w + c)` (equal) or `clamp(w * c)` (proportional), with `c` chosen
/// by bisection so the total is unchanged. Requires a feasible total.
fn settle(
    input: &[f64],
    lower: f64,
    upper: f64,
    total: f64,
    rule: Redistribution,
    passes: usize,
) -> Result<(Vec<f64>, usize, usize), AdjustError> {
    let (min, max) = input.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let apply = |c: f64| -> Vec<f64> {
        input
            .iter()
            .map(|&w| match rule {
                Redistribution::Equal => w + c,
                Redistribution::Proportional => w * c,
            })
            .map(|v| v.clamp(lower, upper))
            .collect()
    };
    // brackets that put every weight at or beyond a bound
    let (mut lo, mut hi) = match rule {
        Redistribution::Equal => {
            (if lower.is_finite() { lower - max } else { -total }, if upper.is_finite() { upper - min } else { total })
        }
        Redistribution::Proportional => (
            if lower.is_finite() { lower / max } else { 0.0 },
            if upper.is_finite() { upper / min } else { total / min },
        ),
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if apply(mid).iter().sum::<f64>() < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut vals = apply(0.5 * (lo + hi));
    let free: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > lower && vals[i] < upper).collect();
    let residual = total - vals.iter().sum::<f64>();
    if !free.is_empty() {
        for &i in &free {
            vals[i] += residual / free.len() as f64;
        }
    } else if residual.abs() > 1e-12 * total {
        return Err(AdjustError::AllTrimmed { lower, upper });
    }
    if vals.iter().any(|v| *v > upper || *v < lower) {
        return Err(AdjustError::TrimNotSettled { passes });
    }
    let n_capped = vals.len() - free.len();
    Ok((vals, n_capped, passes))
}
