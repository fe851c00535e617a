//! Monte Carlo and exact-enumeration harness over synthetic frames.
//!
//! A replicate draws a wave-1 sample, optionally applies panel attrition and
//! refreshment, weights the result and estimates every configured outcome.
//! All randomness comes from substreams keyed by the scenario seed and the
//! replicate index, so results do not depend on scheduling.

mod attrition;
mod draw;
mod dual_frame;
mod exact;
mod monte_carlo;
mod pps;
mod weights;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjust::{AdjustError, PipelineOptions};
use crate::design::DesignError;
use crate::domain::Outcome;
use crate::estimate::{EstimateError, EstimateOptions};
use crate::frame::{CountRange, FrameError, FrameGenConfig};
use crate::glm::{GlmError, LogitOptions};
use crate::pool::PoolError;

pub use attrition::{
    apply_attrition_and_refresh, pool_wave2, AttritionConfig, AttritionModel, PanelMember, Wave2Sample,
};
pub use draw::{draw_wave1, SampleRef, Wave1Sample};
pub use dual_frame::{
    dual_frame_micro_units, enumerate_dual_frame, run_dual_frame_mc, DualFrameConfig, DualFrameExact, DualFrameSummary,
    DualFrameUnit,
};
pub use exact::{enumerate_exact, micro_frame, ExactConfig, ExactResult, WomanInclusion};
pub use monte_carlo::{
    run_monte_carlo, run_replicate, write_replicates, write_summary, AssertionOutcome, MonteCarloResult,
    MonteCarloSummary, OutcomeSummary, ReplicateRecord, REPLICATE_HEADER, SUMMARY_HEADER,
};
pub use pps::{systematic_pps, systematic_pps_outcomes};
pub use weights::{population_raking_spec, weight_sample, WeightedSample};

/// Questionnaires per tract must stay within these bounds.
pub const MIN_VISITS: u32 = 4;
pub const MAX_VISITS: u32 = 12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario configuration: {0}")]
    Config(String),
    #[error("sample space of {outcomes:.3e} outcomes exceeds the limit of {limit}")]
    SampleSpaceTooLarge { outcomes: f64, limit: usize },
    #[error("replicate {replicate}: {source}")]
    Replicate { replicate: usize, source: Box<SimError> },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Per-stage sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleDesign {
    /// Neighborhoods drawn per stratum.
    pub psus_per_stratum: u32,
    /// Tracts drawn per selected neighborhood.
    pub tracts_per_psu: u32,
    /// Households visited per selected tract.
    pub visits_per_tract: CountRange,
    /// Replaces every tract's household response rate when set.
    pub household_response: Option<f64>,
}

impl Default for SampleDesign {
    fn default() -> Self {
        Self {
            psus_per_stratum: 5,
            tracts_per_psu: 3,
            visits_per_tract: CountRange::fixed(8),
            household_response: None,
        }
    }
}

/// Which adjustments follow the base weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct WeightingMode {
    /// Trim, rake to frame totals by age, race and education, and scale.
    pub calibrate: bool,
    /// Divide by the fitted propensity to answer the violence section.
    pub section_nonresponse: bool,
    pub pipeline: PipelineOptions,
    pub logit: LogitOptions,
}

/// Checks applied to a finished run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Assertions {
    /// Largest allowed |relative bias| of the weighted estimate, per outcome.
    pub max_abs_rel_bias: Option<f64>,
    /// Allowed band for the empirical CI coverage, per outcome.
    pub coverage: Option<[f64; 2]>,
    /// Allowed band for the median variance ratio across outcomes.
    pub median_var_ratio: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    pub frame: FrameGenConfig,
    pub sample: SampleDesign,
    /// Panel attrition and refreshment; estimates then use the pooled wave 2.
    pub attrition: Option<AttritionConfig>,
    pub weighting: WeightingMode,
    pub estimate: EstimateOptions,
    /// Outcomes to estimate; empty means all six.
    pub outcomes: Vec<Outcome>,
    pub assertions: Assertions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 1,
            replicates: 100,
            frame: FrameGenConfig::default(),
            sample: SampleDesign::default(),
            attrition: None,
            weighting: WeightingMode::default(),
            estimate: EstimateOptions::default(),
            outcomes: Vec::new(),
            assertions: Assertions::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.replicates == 0 {
            return Err(SimError::Config("replicates must be at least 1".into()));
        }
        self.frame.validate()?;
        let s = &self.sample;
        if s.psus_per_stratum == 0 || s.tracts_per_psu == 0 {
            return Err(SimError::Config("psus_per_stratum and tracts_per_psu must be positive".into()));
        }
        let v = s.visits_per_tract;
        if v.min > v.max || v.min < MIN_VISITS || v.max > MAX_VISITS {
            return Err(SimError::Config(format!(
                "visits_per_tract [{}, {}] must lie within [{MIN_VISITS}, {MAX_VISITS}]",
                v.min, v.max
            )));
        }
        if let Some(p) = s.household_response {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("household_response {p} is not a probability")));
            }
        }
        if let Some(a) = &self.attrition {
            a.validate()?;
        }
        if !(self.estimate.level > 0.0 && self.estimate.level < 1.0) {
            return Err(SimError::Config("confidence level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn outcome_list(&self) -> Vec<Outcome> {
        if self.outcomes.is_empty() {
            Outcome::grid().to_vec()
        } else {
            self.outcomes.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_replicates_rejected() {
        let cfg = ScenarioConfig { replicates: 0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(SimError::Config(_))));
    }

    #[test]
    fn visit_bounds_enforced() {
        for range in [CountRange::new(3, 8), CountRange::new(4, 13), CountRange::new(9, 8)] {
            let cfg = ScenarioConfig {
                sample: SampleDesign { visits_per_tract: range, ..Default::default() },
                ..Default::default()
            };
            assert!(cfg.validate().is_err(), "{range:?}");
        }
        let ok = ScenarioConfig {
            sample: SampleDesign { visits_per_tract: CountRange::new(4, 12), ..Default::default() },
            ..Default::default()
        };
        ok.validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
        let partial = ScenarioConfig::from_json(r#"{"name": "x", "replicates": 3}"#).unwrap();
        assert_eq!(partial.replicates, 3);
        assert_eq!(partial.outcome_list().len(), 6);
    }
}
