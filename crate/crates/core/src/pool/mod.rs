//! Pooling the refreshment (RE) and non-attrited panel (NAT) samples of the
//! second wave into one cross-section.
//!
//! Every member needs her probability of entering the other sample. Those
//! are predicted by regressing the log-odds of the known own-sample
//! probabilities on covariates observed in both samples. The pooled weight is
//! `1 / (p_own + p_hat_other - p_overlap)`, where the overlap term is the
//! probability of being in both samples.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjust::{AdjustError, Stage, Transform, WeightVector};
use crate::frame::{HeadOfHousehold, Household, Tract};
use crate::glm::{fit_weighted_linear, DesignMatrix, GlmError, LinearFit, PROB_CLIP};
use crate::stats::{expit, logit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("covariate schema mismatch: {0}")]
    Schema(String),
    #[error("member {id}: {message}")]
    Member { id: String, message: String },
    #[error("overlap estimate {0} leaves no room for a positive pooled denominator")]
    OverlapBoundary(f64),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "NAT")]
    Nat,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Re => "RE",
            Source::Nat => "NAT",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Source::Re => Source::Nat,
            Source::Nat => Source::Re,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledSampleMember {
    pub id: String,
    pub source: Source,
    pub p_own: f64,
    pub p_hat_other: f64,
    pub p_overlap: f64,
    pub pooled_weight: f64,
}

impl PooledSampleMember {
    /// Checks the probability ranges and computes the pooled weight.
    pub fn new(id: &str, source: Source, p_own: f64, p_hat_other: f64, p_overlap: f64) -> Result<Self, PoolError> {
        let fail = |message: String| PoolError::Member { id: id.to_string(), message };
        if !(p_own > 0.0 && p_own <= 1.0) {
            return Err(fail(format!("own-sample probability {p_own} outside (0, 1]")));
        }
        if !(0.0..1.0).contains(&p_hat_other) {
            return Err(fail(format!("other-sample probability {p_hat_other} outside [0, 1)")));
        }
        if !(p_overlap >= 0.0 && p_overlap < (p_own + p_hat_other).min(1.0)) {
            return Err(fail(format!("overlap {p_overlap} outside [0, min(p_own + p_hat_other, 1))")));
        }
        let denom = p_own + p_hat_other - p_overlap;
        if !(denom > 0.0) {
            return Err(fail(format!("pooled denominator {denom} is not positive")));
        }
        Ok(Self { id: id.to_string(), source, p_own, p_hat_other, p_overlap, pooled_weight: 1.0 / denom })
    }
}

/// Own-sample and counterfactual probabilities of one member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberProbabilities {
    pub id: String,
    pub p_own: f64,
    pub p_hat_other: f64,
}

/// Pooled members, RE first, all sharing the same overlap probability.
pub fn pooled_weights(
    re: &[MemberProbabilities],
    nat: &[MemberProbabilities],
    overlap: f64,
) -> Result<Vec<PooledSampleMember>, PoolError> {
    re.iter()
        .map(|m| (m, Source::Re))
        .chain(nat.iter().map(|m| (m, Source::Nat)))
        .map(|(m, s)| PooledSampleMember::new(&m.id, s, m.p_own, m.p_hat_other, overlap))
        .collect()
}

pub fn pooled_weight_vector(members: &[PooledSampleMember]) -> Result<WeightVector, PoolError> {
    let mut w = WeightVector::new(members.iter().map(|m| m.pooled_weight).collect(), Stage::Pooled)?;
    w.lineage.push(Transform::Pool);
    Ok(w)
}

/// Named covariate rows shared by both samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CovariateTable {
    pub fn new(names: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self { names: names.iter().map(|s| s.to_string()).collect(), rows }
    }
}

/// Covariates used by default: tract size, household size and the head of
/// household's age, education level and sex.
pub const DEFAULT_COUNTERFACTUAL_COVARIATES: [&str; 5] =
    ["tract_households", "household_size", "head_age", "head_education", "head_female"];

/// The default covariate row of a household, `None` if its head is unknown.
pub fn default_covariate_row(tract: &Tract, household: &Household) -> Option<Vec<f64>> {
    let HeadOfHousehold { age, education, female } = household.head.as_ref()?;
    Some(vec![
        tract.n_households as f64,
        f64::from(household.n_eligible_women),
        f64::from(*age),
        f64::from(education.level()),
        f64::from(u8::from(*female)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualModel {
    pub covariates: Vec<String>,
    pub fit: LinearFit,
}

impl CounterfactualModel {
    pub fn predict(&self, target: &CovariateTable) -> Result<Vec<f64>, PoolError> {
        if let Some(missing) = target.names.iter().find(|n| !self.covariates.contains(n)) {
            return Err(PoolError::Schema(format!("`{missing}` was not in the fitted model")));
        }
        if let Some(missing) = self.covariates.iter().find(|n| !target.names.contains(n)) {
            return Err(PoolError::Schema(format!("target lacks `{missing}`")));
        }
        let order: Vec<usize> =
            self.covariates.iter().map(|n| target.names.iter().position(|t| t == n).expect("checked")).collect();
        let rows: Vec<Vec<f64>> = target.rows.iter().map(|r| order.iter().map(|&k| r[k]).collect()).collect();
        let names: Vec<&str> = self.covariates.iter().map(String::as_str).collect();
        let x = DesignMatrix::with_intercept(&names, &rows)?;
        Ok(self.fit.predict(&x)?.into_iter().map(expit).collect())
    }
}

/// Regresses the log-odds of `source_probs` on the source covariates with
/// unit weights and predicts the target's probabilities on the same scale.
pub fn fit_counterfactual(
    source_probs: &[f64],
    source: &CovariateTable,
    target: &CovariateTable,
) -> Result<(Vec<f64>, CounterfactualModel), PoolError> {
    if source_probs.len() != source.rows.len() {
        return Err(PoolError::Input(format!(
            "{} probabilities for {} covariate rows",
            source_probs.len(),
            source.rows.len()
        )));
    }
    let y: Vec<f64> = source_probs.iter().map(|p| logit(p.clamp(PROB_CLIP, 1.0 - PROB_CLIP))).collect();
    let names: Vec<&str> = source.names.iter().map(String::as_str).collect();
    let x = DesignMatrix::with_intercept(&names, &source.rows)?;
    let fit = fit_weighted_linear(&x, &y, &vec![1.0; y.len()])?;
    let model = CounterfactualModel { covariates: source.names.clone(), fit };
    Ok((model.predict(target)?, model))
}

/// Household membership of one pooled member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdLink {
    pub household: String,
    pub source: Source,
    /// RE member who replaced a panel woman of the same household.
    pub in_household_replacement: bool,
}

/// Share of the combined sample's households that hold an in-household
/// replacement, i.e. households present in both samples.
pub fn estimate_overlap(members: &[HouseholdLink]) -> Result<f64, PoolError> {
    let all: HashSet<&str> = members.iter().map(|m| m.household.as_str()).collect();
    if all.is_empty() {
        return Err(PoolError::Input("no households".into()));
    }
    let both: HashSet<&str> = members
        .iter()
        .filter(|m| m.source == Source::Re && m.in_household_replacement)
        .map(|m| m.household.as_str())
        .collect();
    let ratio = both.len() as f64 / all.len() as f64;
    if ratio >= 1.0 {
        return Err(PoolError::OverlapBoundary(ratio));
    }
    Ok(ratio)
}

/// Joint selection probability of one member implied by a household overlap
/// share `r`, treating `r` as the share of the union that is in both samples:
/// `r (p_own + p_other) / (1 + r)`.
pub fn overlap_from_share(share: f64, p_own: f64, p_hat_other: f64) -> f64 {
    share * (p_own + p_hat_other) / (1.0 + share)
}

pub const POOLED_HEADER: [&str; 6] = ["woman_id", "source", "p_own", "p_hat_other", "p_overlap", "pooled_weight"];

pub fn write_pooled<W: Write>(members: &[PooledSampleMember], writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(POOLED_HEADER)?;
    for m in members {
        wtr.write_record([
            m.id.clone(),
            m.source.as_str().to_string(),
            format!("{:.16e}", m.p_own),
            format!("{:.16e}", m.p_hat_other),
            format!("{:.16e}", m.p_overlap),
            format!("{:.16e}", m.pooled_weight),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_arithmetic() {
        let m = PooledSampleMember::new("W1", Source::Re, 0.5, 0.25, 0.0).unwrap();
        assert!((m.pooled_weight - 4.0 / 3.0).abs() < 1e-15);
        let m = PooledSampleMember::new("W2", Source::Nat, 0.2, 0.0, 0.0).unwrap();
        assert!((m.pooled_weight - 5.0).abs() < 1e-15);
        let err = PooledSampleMember::new("W3", Source::Re, 0.3, 0.2, 0.6).unwrap_err();
        assert!(err.to_string().contains("W3"));
    }

    #[test]
    fn constant_probabilities_predict_constant() {
        let source = CovariateTable::new(&["a", "b"], (0..10).map(|i| vec![i as f64, (i % 3) as f64]).collect());
        let target = CovariateTable::new(&["b", "a"], vec![vec![1.0, 4.0], vec![2.0, -3.0]]);
        let (p, model) = fit_counterfactual(&[0.3; 10], &source, &target).unwrap();
        assert!(p.iter().all(|v| (v - 0.3).abs() < 1e-12));
        assert_eq!(model.covariates, vec!["a", "b"]);
    }

    #[test]
    fn logit_linear_probabilities_recovered() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 6) as f64, (i % 5) as f64 * 0.5]).collect();
        let truth = |r: &[f64]| expit(-2.0 + 0.3 * r[0] - 0.7 * r[1]);
        let probs: Vec<f64> = rows.iter().map(|r| truth(r)).collect();
        let source = CovariateTable::new(&["x1", "x2"], rows);
        let target_rows = vec![vec![2.5, 1.0], vec![7.0, 0.0]];
        let target = CovariateTable::new(&["x1", "x2"], target_rows.clone());
        let (p, model) = fit_counterfactual(&probs, &source, &target).unwrap();
        for (r, v) in target_rows.iter().zip(&p) {
            assert!((v - truth(r)).abs() < 1e-6);
        }
        assert!((model.fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn schema_mismatch() {
        let source = CovariateTable::new(&["a"], (0..5).map(|i| vec![i as f64]).collect());
        let target = CovariateTable::new(&["a", "z"], vec![vec![1.0, 2.0]]);
        let probs = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert!(matches!(fit_counterfactual(&probs, &source, &target), Err(PoolError::Schema(_))));
    }

    #[test]
    fn overlap_estimates() {
        let link = |h: &str, s, inh| HouseholdLink { household: h.into(), source: s, in_household_replacement: inh };
        let none = vec![link("H1", Source::Nat, false), link("H2", Source::Re, false)];
        assert_eq!(estimate_overlap(&none).unwrap(), 0.0);
        let some = vec![
            link("H1", Source::Nat, false),
            link("H2", Source::Re, true),
            link("H3", Source::Re, false),
            link("H4", Source::Nat, false),
        ];
        assert_eq!(estimate_overlap(&some).unwrap(), 0.25);
        let all = vec![link("H1", Source::Re, true), link("H2", Source::Re, true)];
        assert!(matches!(estimate_overlap(&all), Err(PoolError::OverlapBoundary(_))));
    }

    #[test]
    fn pooled_csv_header() {
        let m = pooled_weights(
            &[MemberProbabilities { id: "R1".into(), p_own: 0.5, p_hat_other: 0.1 }],
            &[MemberProbabilities { id: "N1".into(), p_own: 0.4, p_hat_other: 0.2 }],
            0.05,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_pooled(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("woman_id,source,p_own,p_hat_other,p_overlap,pooled_weight\nR1,RE,"));
        assert_eq!(pooled_weight_vector(&m).unwrap().lineage_kinds(), vec!["pool"]);
    }

    proptest! {
        #[test]
        fn swapping_frames_keeps_weights(p in 0.01f64..1.0, q in 0.0f64..0.99, frac in 0.0f64..0.99) {
            let overlap = frac * (p * q);
            let a = PooledSampleMember::new("x", Source::Re, p, q, overlap);
            if q > 0.0 {
                let b = PooledSampleMember::new("x", Source::Nat, q, p.min(0.999), overlap);
                if let (Ok(a), Ok(b)) = (&a, &b) {
                    if p < 0.999 {
                        prop_assert!((a.pooled_weight - b.pooled_weight).abs() <= 1e-12 * a.pooled_weight);
                    }
                }
            }
            let a = a.unwrap();
            prop_assert!(a.pooled_weight.is_finite() && a.pooled_weight > 0.0);
        }
    }
}
