//! Analysis weights for a simulated sample.

use std::collections::BTreeMap;

use super::{SimError, WeightingMode};
use crate::adjust::{
    covariate_labels, final_design_weights_with, section_nonresponse_weights, RakingSpec, Stage, WeightVector,
};
use crate::design::Observation;
use crate::estimate::SurveyDesign;
use crate::frame::City;

/// Raking controls from the frame: counts of women by age group, race and
/// education. Categories absent from the population are dropped.
pub fn population_raking_spec(city: &City) -> RakingSpec {
    let mut margins: BTreeMap<&str, BTreeMap<&'static str, f64>> = BTreeMap::new();
    for w in city.women() {
        for var in ["age_group", "race", "education"] {
            let label = w.covariates.margin_label(var).expect("known margin");
            *margins.entry(var).or_default().entry(label).or_default() += 1.0;
        }
    }
    RakingSpec::counts(
        ["age_group", "race", "education"]
            .into_iter()
            .map(|var| (var, margins.get(var).map(|m| m.iter().map(|(l, c)| (*l, *c)).collect()).unwrap_or_default()))
            .collect(),
    )
}

/// Respondents entering estimation and their design.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    /// Indices into the weighted observations, grouped by city.
    pub members: Vec<usize>,
    pub design: SurveyDesign,
}

/// Weights each city separately and stacks the per-city designs. Strata are
/// the frame strata and PSUs the neighborhoods. Only women who answered the
/// violence section are kept.
pub fn weight_sample(
    cities: &[City],
    observations: &[Observation],
    base: &[f64],
    mode: &WeightingMode,
) -> Result<WeightedSample, SimError> {
    if base.len() != observations.len() {
        return Err(SimError::Config(format!("{} base weights for {} observations", base.len(), observations.len())));
    }
    let mut members = Vec::new();
    let mut designs: Vec<(&str, SurveyDesign)> = Vec::new();
    for city in cities {
        let idx: Vec<usize> = (0..observations.len()).filter(|&i| observations[i].city == city.id).collect();
        if idx.is_empty() {
            continue;
        }
        let covariates: Vec<_> = idx.iter().map(|&i| observations[i].covariates).collect();
        let mut w = WeightVector::new(idx.iter().map(|&i| base[i]).collect(), Stage::Base)?;
        if mode.calibrate {
            let spec = population_raking_spec(city);
            let labels = covariate_labels(&spec, &covariates)?;
            w = final_design_weights_with(&w, &spec, &labels, &mode.pipeline)?;
        }
        let answered: Vec<bool> = idx.iter().map(|&i| observations[i].answered_violence).collect();
        let (local, values): (Vec<usize>, Vec<f64>) = if mode.section_nonresponse {
            let s = section_nonresponse_weights(&w, &covariates, &answered, &mode.logit)?;
            (s.respondents, s.weights.into_values())
        } else {
            (0..idx.len()).filter(|&k| answered[k]).map(|k| (k, w.values()[k])).unzip()
        };
        if local.is_empty() {
            continue;
        }
        let strata = local.iter().map(|&k| observations[idx[k]].stratum.clone()).collect();
        let psus = local.iter().map(|&k| observations[idx[k]].neighborhood.clone()).collect();
        designs.push((city.id.as_str(), SurveyDesign::new(strata, psus, values)?));
        members.extend(local.iter().map(|&k| idx[k]));
    }
    if designs.is_empty() {
        return Err(SimError::Config("no respondent answered the violence section".into()));
    }
    let design = SurveyDesign::concat(designs.iter().map(|(c, d)| (*c, d)))?;
    Ok(WeightedSample { members, design })
}
