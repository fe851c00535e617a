//! Prevalence estimation with Taylor-linearized variances, plus the Diff and
//! VarRatio comparisons between weighted and unweighted designs.

mod attrition;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::stats::{expit, logit};

pub use attrition::{attrition_rate, table2_rows, AttritionRow, AttritionTotals};
pub use report::{
    compare, figure_panels, read_report, render_table, write_comparison, write_report, ComparisonRow, DesignKind,
    PrevalenceRow, COMPARISON_HEADER, REPORT_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("no observed outcomes in the cell")]
    EmptyCell,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

/// Stratum and PSU labels plus analysis weights, one entry per observation.
/// PSU labels only need to be unique within their stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDesign {
    strata: Vec<String>,
    psus: Vec<String>,
    weights: Vec<f64>,
}

impl SurveyDesign {
    pub fn new(strata: Vec<String>, psus: Vec<String>, weights: Vec<f64>) -> Result<Self, EstimateError> {
        let n = weights.len();
        if strata.len() != n || psus.len() != n {
            return Err(EstimateError::Dimension(format!("{} strata, {} PSUs, {n} weights", strata.len(), psus.len())));
        }
        if n == 0 {
            return Err(EstimateError::InvalidDesign("no observations".into()));
        }
        if let Some(i) = strata.iter().zip(&psus).position(|(s, p)| s.is_empty() || p.is_empty()) {
            return Err(EstimateError::InvalidDesign(format!("observation {i} lacks a stratum or PSU label")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(EstimateError::InvalidDesign(format!("weight {w} is not positive")));
        }
        Ok(Self { strata, psus, weights })
    }

    /// Every observation its own PSU in a single stratum.
    pub fn simple(weights: Vec<f64>) -> Result<Self, EstimateError> {
        let n = weights.len();
        Self::new(vec!["1".into(); n], (1..=n).map(|i| i.to_string()).collect(), weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same strata and clusters with unit weights.
    pub fn unweighted(&self) -> Self {
        Self { weights: vec![1.0; self.len()], ..self.clone() }
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, EstimateError> {
        Self::new(self.strata.clone(), self.psus.clone(), weights)
    }

    /// Concatenates per-city designs, nesting strata and PSUs within city.
    pub fn concat<'a>(parts: impl IntoIterator<Item = (&'a str, &'a SurveyDesign)>) -> Result<Self, EstimateError> {
        let (mut strata, mut psus, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for (city, d) in parts {
            strata.extend(d.strata.iter().map(|s| format!("{city}\u{1f}{s}")));
            psus.extend(d.psus.iter().cloned());
            weights.extend_from_slice(&d.weights);
        }
        Self::new(strata, psus, weights)
    }

    pub fn n_strata(&self) -> usize {
        let mut s: Vec<&String> = self.strata.iter().collect();
        s.sort();
        s.dedup();
        s.len()
    }

    pub fn n_psus(&self) -> usize {
        let mut s: Vec<(&String, &String)> = self.strata.iter().zip(&self.psus).collect();
        s.sort();
        s.dedup();
        s.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    /// Wald interval for the log-odds, mapped back to the proportion scale.
    #[default]
    Logit,
    /// Symmetric Wald interval on the proportion scale.
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    pub ci: CiMethod,
    pub level: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { ci: CiMethod::Logit, level: 0.95 }
    }
}

/// A proportion on the 0-1 scale with its linearized standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub prev: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// PSUs minus strata.
    pub df: i64,
}

impl Estimate {
    pub fn var(&self) -> f64 {
        self.se * self.se
    }
}

/// OR over the answered items; `None` when every item is missing.
pub fn victim_indicator(items: &[Option<bool>]) -> Option<bool> {
    if items.contains(&Some(true)) {
        Some(true)
    } else if items.iter().any(Option::is_some) {
        Some(false)
    } else {
        None
    }
}

/// Weighted proportion `Σ w y / Σ w` over observations with a non-missing
/// indicator. Missing indicators stay in the design as a domain with zero
/// score, so every PSU keeps counting toward the degrees of freedom.
pub fn prevalence(
    design: &SurveyDesign,
    y: &[Option<bool>],
    opts: &EstimateOptions,
) -> Result<Estimate, EstimateError> {
    if y.len() != design.len() {
        return Err(EstimateError::Dimension(format!("{} indicators for {} observations", y.len(), design.len())));
    }
    let n = y.iter().filter(|v| v.is_some()).count();
    if n == 0 {
        return Err(EstimateError::EmptyCell);
    }
    let mut w_sum = 0.0;
    let mut wy = 0.0;
    for (w, v) in design.weights.iter().zip(y) {
        if let Some(v) = v {
            w_sum += w;
            if *v {
                wy += w;
            }
        }
    }
    let prev = wy / w_sum;

    let mut strata: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for (i, yi) in y.iter().enumerate() {
        let z = match yi {
            Some(v) => design.weights[i] * (f64::from(u8::from(*v)) - prev) / w_sum,
            None => 0.0,
        };
        *strata.entry(&design.strata[i]).or_default().entry(&design.psus[i]).or_default() += z;
    }
    let var = stratified_variance(strata.values().map(|m| m.values().copied().collect::<Vec<_>>()));
    let n_psu: usize = strata.values().map(BTreeMap::len).sum();
    let df = n_psu as i64 - strata.len() as i64;
    let se = var.max(0.0).sqrt();
    let (ci_low, ci_high) = confidence_interval(prev, se, df, opts);
    Ok(Estimate { n, prev, se, ci_low, ci_high, df })
}

/// Between-PSU variance of score totals, summed over strata. A stratum with a
/// single PSU contributes that PSU's squared total, i.e. its deviation from
/// the overall mean of the scores (zero), without a small-sample factor.
pub fn stratified_variance(strata: impl IntoIterator<Item = Vec<f64>>) -> f64 {
    strata
        .into_iter()
        .map(|totals| {
            let m = totals.len();
            if m == 1 {
                lonely_psu_adjust(totals[0])
            } else {
                let mean = totals.iter().sum::<f64>() / m as f64;
                m as f64 / (m - 1) as f64 * totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
            }
        })
        .sum()
}

/// Contribution of a singleton stratum with PSU score total `total`.
pub fn lonely_psu_adjust(total: f64) -> f64 {
    total * total
}

pub fn critical_value(df: i64, level: f64) -> f64 {
    let p = 1.0 - (1.0 - level) / 2.0;
    if df >= 1 {
        StudentsT::new(0.0, 1.0, df as f64).expect("positive df").inverse_cdf(p)
    } else {
        Normal::standard().inverse_cdf(p)
    }
}

fn confidence_interval(prev: f64, se: f64, df: i64, opts: &EstimateOptions) -> (f64, f64) {
    if se == 0.0 || prev <= 0.0 || prev >= 1.0 {
        return (prev, prev);
    }
    let t = critical_value(df, opts.level);
    match opts.ci {
        CiMethod::Logit => {
            let l = logit(prev);
            let se_l = se / (prev * (1.0 - prev));
            (expit(l - t * se_l), expit(l + t * se_l))
        }
        CiMethod::Wald => ((prev - t * se).max(0.0), (prev + t * se).min(1.0)),
    }
}

/// Pooled estimate over several cities' designs.
pub fn region_aggregate(
    cities: &[(&str, &SurveyDesign, &[Option<bool>])],
    opts: &EstimateOptions,
) -> Result<Estimate, EstimateError> {
    let design = SurveyDesign::concat(cities.iter().map(|(c, d, _)| (*c, *d)))?;
    let y: Vec<Option<bool>> = cities.iter().flat_map(|(_, _, y)| y.iter().copied()).collect();
    prevalence(&design, &y, opts)
}

/// `100 (w - unw) / unw`; `None` when `unw` is zero.
pub fn diff_metric(prev_w: f64, prev_unw: f64) -> Option<f64> {
    (prev_unw != 0.0).then(|| 100.0 * (prev_w - prev_unw) / prev_unw)
}

/// `var_w / var_unw`; `None` when `var_unw` is zero.
pub fn var_ratio(var_w: f64, var_unw: f64) -> Option<f64> {
    (var_unw != 0.0).then(|| var_w / var_unw)
}
