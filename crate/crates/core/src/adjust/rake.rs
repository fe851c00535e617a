use serde::{Deserialize, Serialize};

use super::{AdjustError, MarginState, Stage, Transform, WeightVector};
use crate::domain::Covariates;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginCategory {
    pub label: String,
    pub control_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginVariable {
    pub name: String,
    pub categories: Vec<MarginCategory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    /// Population counts, matched as given.
    #[default]
    Counts,
    /// Shares, rescaled to the current weight total.
    Proportions,
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RakingSpec {
    pub variables: Vec<MarginVariable>,
    /// Maximum absolute relative margin error at convergence.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub controls: ControlKind,
}

impl RakingSpec {
    pub fn counts(variables: Vec<(&str, Vec<(&str, f64)>)>) -> Self {
        Self {
            variables: variables
                .into_iter()
                .map(|(name, cats)| MarginVariable {
                    name: name.to_string(),
                    categories: cats
                        .into_iter()
                        .map(|(label, control_total)| MarginCategory { label: label.to_string(), control_total })
                        .collect(),
                })
                .collect(),
            tolerance: default_tolerance(),
            max_iter: default_max_iter(),
            controls: ControlKind::Counts,
        }
    }

    pub fn validate(&self) -> Result<(), AdjustError> {
        if self.variables.is_empty() {
            return Err(AdjustError::Spec("no margin variables".into()));
        }
        if !(self.tolerance > 0.0) || self.max_iter == 0 {
            return Err(AdjustError::Spec("tolerance and max_iter must be positive".into()));
        }
        let mut grand = None;
        for var in &self.variables {
            if var.categories.is_empty() {
                return Err(AdjustError::Spec(format!("variable `{}` has no categories", var.name)));
            }
            for (k, c) in var.categories.iter().enumerate() {
                if !(c.control_total >= 0.0 && c.control_total.is_finite()) {
                    return Err(AdjustError::Spec(format!(
                        "`{}`/`{}`: control must be nonnegative",
                        var.name, c.label
                    )));
                }
                if var.categories[..k].iter().any(|o| o.label == c.label) {
                    return Err(AdjustError::Spec(format!("`{}`: duplicate category `{}`", var.name, c.label)));
                }
            }
            let total: f64 = var.categories.iter().map(|c| c.control_total).sum();
            if !(total > 0.0) {
                return Err(AdjustError::Spec(format!("`{}`: controls sum to zero", var.name)));
            }
            match grand {
                None => grand = Some(total),
                Some(g) if (total - g).abs() > 1e-9 * g => {
                    return Err(AdjustError::Spec(format!(
                        "`{}` controls sum to {total}, other variables to {g}",
                        var.name
                    )));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Labels of each respondent for the spec's margin variables, in spec order.
pub fn covariate_labels(spec: &RakingSpec, covariates: &[Covariates]) -> Result<Vec<Vec<String>>, AdjustError> {
    covariates
        .iter()
        .map(|c| {
            spec.variables
                .iter()
                .map(|v| {
                    c.margin_label(&v.name)
                        .map(str::to_string)
                        .ok_or_else(|| AdjustError::Spec(format!("unknown margin variable `{}`", v.name)))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RakeReport {
    pub iterations: usize,
    pub max_error: f64,
    /// Maximum relative margin error after each sweep.
    pub history: Vec<f64>,
}

/// Iterative proportional fitting to the spec's margins. `labels[i][v]` is
/// observation `i`'s category for variable `v`.
pub fn rake(
    w: &WeightVector,
    spec: &RakingSpec,
    labels: &[Vec<String>],
) -> Result<(WeightVector, RakeReport), AdjustError> {
    spec.validate()?;
    let n = w.len();
    if labels.len() != n {
        return Err(AdjustError::Argument(format!("{} label rows for {n} weights", labels.len())));
    }
    let nv = spec.variables.len();
    // category index per observation and variable
    let mut cell = vec![vec![0usize; nv]; n];
    for (i, row) in labels.iter().enumerate() {
        if row.len() != nv {
            return Err(AdjustError::Structural(format!(
                "observation {i} has {} labels for {nv} variables",
                row.len()
            )));
        }
        for (v, var) in spec.variables.iter().enumerate() {
            cell[i][v] = var.categories.iter().position(|c| c.label == row[v]).ok_or_else(|| {
                AdjustError::Structural(format!("observation {i}: `{}` is not a category of `{}`", row[v], var.name))
            })?;
        }
    }
    let scale = match spec.controls {
        ControlKind::Counts => 1.0,
        ControlKind::Proportions => {
            let g: f64 = spec.variables[0].categories.iter().map(|c| c.control_total).sum();
            w.total() / g
        }
    };
    let controls: Vec<Vec<f64>> =
        spec.variables.iter().map(|v| v.categories.iter().map(|c| c.control_total * scale).collect()).collect();

    let mut vals = w.values().to_vec();
    let sums = |vals: &[f64], v: usize| {
        let mut s = vec![0.0; controls[v].len()];
        for i in 0..n {
            s[cell[i][v]] += vals[i];
        }
        s
    };
    for (v, var) in spec.variables.iter().enumerate() {
        let s = sums(&vals, v);
        for (k, c) in var.categories.iter().enumerate() {
            if s[k] == 0.0 && controls[v][k] > 0.0 {
                return Err(AdjustError::Structural(format!(
                    "`{}`/`{}` has a positive control but no sample weight",
                    var.name, c.label
                )));
            }
            if s[k] > 0.0 && controls[v][k] == 0.0 {
                return Err(AdjustError::Structural(format!(
                    "`{}`/`{}` has sample weight but a zero control",
                    var.name, c.label
                )));
            }
        }
    }
    let max_error = |vals: &[f64]| {
        let mut e: f64 = 0.0;
        for (v, ctl) in controls.iter().enumerate() {
            for (s, c) in sums(vals, v).iter().zip(ctl) {
                if *c > 0.0 {
                    e = e.max((s - c).abs() / c);
                }
            }
        }
        e
    };

    let mut history = Vec::new();
    let mut err = max_error(&vals);
    let mut iterations = 0;
    while err >= spec.tolerance {
        if iterations == spec.max_iter {
            let margins = spec
                .variables
                .iter()
                .enumerate()
                .flat_map(|(v, var)| {
                    let s = sums(&vals, v);
                    var.categories
                        .iter()
                        .enumerate()
                        .map(|(k, c)| MarginState {
                            variable: var.name.clone(),
                            label: c.label.clone(),
                            achieved: s[k],
                            control: controls[v][k],
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            return Err(AdjustError::RakeNonConvergence { iterations, max_error: err, margins });
        }
        iterations += 1;
        for v in 0..nv {
            let s = sums(&vals, v);
            let factor: Vec<f64> =
                s.iter().zip(&controls[v]).map(|(s, c)| if *s > 0.0 { c / s } else { 1.0 }).collect();
            for i in 0..n {
                vals[i] *= factor[cell[i][v]];
            }
        }
        err = max_error(&vals);
        history.push(err);
    }
    let out = w.derive(vals, Stage::Raked, Transform::Rake { iterations, max_error: err })?;
    Ok((out, RakeReport { iterations, max_error: err, history }))
}
