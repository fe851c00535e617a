use serde::{Deserialize, Serialize};

use super::{scale_to_mean_one, AdjustError, Stage, Transform, WeightVector};
use crate::domain::Covariates;
use crate::glm::{fit_weighted_logit_with, predict_prob, DesignMatrix, LogitFit, LogitOptions};

pub const RESPONSE_COVARIATES: [&str; 3] = ["cohab", "know_victim", "children"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionWeights {
    /// Mean-one weights of the respondents, in `respondents` order.
    pub weights: WeightVector,
    /// Positions of the respondents in the input.
    pub respondents: Vec<usize>,
    /// Fitted answer propensity of every input observation.
    pub propensity: Vec<f64>,
    /// `None` when the answer flags were constant and no model was fitted.
    pub fit: Option<LogitFit>,
}

/// Divides respondents' design weights by their fitted propensity to answer
/// the violence section and rescales to mean one. The propensity model is a
/// logit on cohabitation, knowing a victim and children, weighted by the
/// design weights; fit it per city.
pub fn section_nonresponse_weights(
    design_w: &WeightVector,
    covariates: &[Covariates],
    answered: &[bool],
    opts: &LogitOptions,
) -> Result<SectionWeights, AdjustError> {
    let n = design_w.len();
    if covariates.len() != n || answered.len() != n {
        return Err(AdjustError::Argument(format!(
            "{n} weights, {} covariate rows, {} answer flags",
            covariates.len(),
            answered.len()
        )));
    }
    let respondents: Vec<usize> = (0..n).filter(|&i| answered[i]).collect();
    if respondents.is_empty() {
        return Err(AdjustError::Argument("no observation answered the section".into()));
    }
    let (propensity, fit) = if respondents.len() == n {
        log::warn!("every observation answered the section; using unit propensity");
        (vec![1.0; n], None)
    } else {
        let rows: Vec<Vec<f64>> = covariates.iter().map(|c| c.response_row().to_vec()).collect();
        let x = DesignMatrix::with_intercept(&RESPONSE_COVARIATES, &rows)?;
        let y: Vec<f64> = answered.iter().map(|a| f64::from(u8::from(*a))).collect();
        let fit = fit_weighted_logit_with(&x, &y, design_w.values(), opts)?;
        (predict_prob(&fit, &x)?, Some(fit))
    };
    let values: Vec<f64> = respondents.iter().map(|&i| design_w.values()[i] / propensity[i]).collect();
    let mut adjusted = WeightVector::new(values, Stage::SectionAdjusted)?;
    adjusted.lineage = design_w.lineage.clone();
    adjusted.lineage.push(Transform::SectionNonresponse { respondents: respondents.len(), fitted: fit.is_some() });
    let mut weights = scale_to_mean_one(&adjusted)?;
    weights.stage = Stage::SectionAdjusted;
    Ok(SectionWeights { weights, respondents, propensity, fit })
}
