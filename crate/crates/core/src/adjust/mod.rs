//! Final design weights (trim, rake, scale, retrim, rescale) and the
//! violence-section nonresponse adjustment.

mod nonresponse;
mod rake;
mod trim;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Covariates;
use crate::glm::GlmError;

pub use nonresponse::{section_nonresponse_weights, SectionWeights};
pub use rake::{covariate_labels, rake, ControlKind, MarginCategory, MarginVariable, RakeReport, RakingSpec};
pub use trim::{trim_to_bounds, trim_weights, QuantileRule, Redistribution, TrimOptions};

/// Weights below this after any adjustment are rejected.
pub const MIN_WEIGHT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdjustError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("every observation falls outside the trimming bounds [{lower}, {upper}]")]
    AllTrimmed { lower: f64, upper: f64 },
    #[error("trimmed mass still re-crosses the caps after {passes} passes")]
    TrimNotSettled { passes: usize },
    #[error("invalid raking spec: {0}")]
    Spec(String),
    #[error("raking structure: {0}")]
    Structural(String),
    #[error("raking did not converge in {iterations} iterations (max relative margin error {max_error:e})")]
    RakeNonConvergence { iterations: usize, max_error: f64, margins: Vec<MarginState> },
    #[error("weight {value} at position {index} fell below {MIN_WEIGHT}")]
    ZeroWeight { index: usize, value: f64 },
    #[error(transparent)]
    Glm(#[from] GlmError),
}

/// Achieved versus target weight in one raking category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginState {
    pub variable: String,
    pub label: String,
    pub achieved: f64,
    pub control: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Base,
    Trimmed,
    Raked,
    Scaled,
    SectionAdjusted,
    Pooled,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Base => "base",
            Stage::Trimmed => "trimmed",
            Stage::Raked => "raked",
            Stage::Scaled => "scaled",
            Stage::SectionAdjusted => "section_adjusted",
            Stage::Pooled => "pooled",
        }
    }
}

/// One applied transformation with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Trim { lower_q: Option<f64>, upper_q: Option<f64>, lower: f64, upper: f64, n_capped: usize, passes: usize },
    Rake { iterations: usize, max_error: f64 },
    Scale { factor: f64 },
    SectionNonresponse { respondents: usize, fitted: bool },
    Pool,
}

impl Transform {
    pub fn kind(&self) -> &'static str {
        match self {
            Transform::Trim { .. } => "trim",
            Transform::Rake { .. } => "rake",
            Transform::Scale { .. } => "scale",
            Transform::SectionNonresponse { .. } => "section_nonresponse",
            Transform::Pool => "pool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    values: Vec<f64>,
    pub stage: Stage,
    pub lineage: Vec<Transform>,
}

impl WeightVector {
    pub fn new(values: Vec<f64>, stage: Stage) -> Result<Self, AdjustError> {
        if values.is_empty() {
            return Err(AdjustError::InvalidWeights("empty weight vector".into()));
        }
        check_positive(&values)?;
        Ok(Self { values, stage, lineage: Vec::new() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn lineage_kinds(&self) -> Vec<&'static str> {
        self.lineage.iter().map(Transform::kind).collect()
    }

    pub(crate) fn derive(&self, values: Vec<f64>, stage: Stage, step: Transform) -> Result<Self, AdjustError> {
        check_positive(&values)?;
        let mut lineage = self.lineage.clone();
        lineage.push(step);
        Ok(Self { values, stage, lineage })
    }
}

fn check_positive(values: &[f64]) -> Result<(), AdjustError> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(AdjustError::InvalidWeights(format!("non-finite weight at position {index}")));
        }
        if value < MIN_WEIGHT {
            return Err(AdjustError::ZeroWeight { index, value });
        }
    }
    Ok(())
}

/// Rescales to mean one, preserving ratios.
pub fn scale_to_mean_one(w: &WeightVector) -> Result<WeightVector, AdjustError> {
    let factor = w.len() as f64 / w.total();
    let values = w.values.iter().map(|v| v * factor).collect();
    w.derive(values, Stage::Scaled, Transform::Scale { factor })
}

/// Quantile levels of the two trimming passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub first_lower_q: f64,
    pub first_upper_q: f64,
    pub second_upper_q: f64,
    pub trim: TrimOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { first_lower_q: 0.05, first_upper_q: 0.95, second_upper_q: 0.95, trim: TrimOptions::default() }
    }
}

/// Base weights to final design weights: trim at both tails, rake, scale to
/// mean one, trim the upper tail only, scale again.
pub fn final_design_weights(
    base: &WeightVector,
    spec: &RakingSpec,
    labels: &[Vec<String>],
) -> Result<WeightVector, AdjustError> {
    final_design_weights_with(base, spec, labels, &PipelineOptions::default())
}

pub fn final_design_weights_with(
    base: &WeightVector,
    spec: &RakingSpec,
    labels: &[Vec<String>],
    opts: &PipelineOptions,
) -> Result<WeightVector, AdjustError> {
    let w = trim_weights(base, Some(opts.first_lower_q), Some(opts.first_upper_q), &opts.trim)?;
    let (w, _) = rake(&w, spec, labels)?;
    let w = scale_to_mean_one(&w)?;
    let w = trim_weights(&w, None, Some(opts.second_upper_q), &opts.trim)?;
    scale_to_mean_one(&w)
}

/// Convenience wrapper deriving margin labels from respondent covariates.
pub fn final_design_weights_for(
    base: &WeightVector,
    spec: &RakingSpec,
    covariates: &[Covariates],
) -> Result<WeightVector, AdjustError> {
    let labels = covariate_labels(spec, covariates)?;
    final_design_weights(base, spec, &labels)
}

pub const WEIGHTS_HEADER: [&str; 3] = ["woman_id", "stage", "weight"];

/// Writes `woman_id,stage,weight` rows; weights use 17 significant digits.
pub fn write_weights<W: Write>(
    wtr: &mut csv::Writer<W>,
    ids: &[String],
    weights: &WeightVector,
) -> Result<(), csv::Error> {
    for (id, w) in ids.iter().zip(weights.values()) {
        wtr.write_record([id.as_str(), weights.stage.as_str(), &format!("{w:.16e}")])?;
    }
    Ok(())
}
