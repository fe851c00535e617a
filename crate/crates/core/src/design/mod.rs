//! Stage-wise inclusion probabilities and base design weights.
//!
//! A woman enters the sample through five events: her neighborhood is drawn
//! (PPS within the stratum), her census tract is drawn (PPS within the
//! neighborhood), her household is visited, the visit yields a valid
//! questionnaire, and she is the one eligible woman drawn in the household.
//! The overall probability is the product of the five and the base weight is
//! its reciprocal.

mod counts;
mod observation;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{FrameError, SamplingFrame};

pub use counts::{parse_stage_counts, read_stage_counts, write_stage_counts, StageCounts, StageCountsTable, TractKey};
pub use observation::{parse_observations, read_observations, write_observations, ItemAnswers, Observation};

/// Relative tolerance for probability equality checks.
pub const REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("{what}: probability {value} exceeds 1; treat the unit as a certainty selection")]
    CertaintyUnit { what: String, value: f64 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unit not found in frame: {0}")]
    UnknownUnit(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn pps_single(what: &str, n_sampled: u32, size: u64, total: u64) -> Result<f64, DesignError> {
    if n_sampled == 0 {
        return Err(DesignError::Precondition(format!("{what}: no units sampled")));
    }
    if size == 0 || size > total {
        return Err(DesignError::Precondition(format!("{what}: size {size} outside (0, {total}]")));
    }
    let num = u128::from(n_sampled) * u128::from(size);
    if num > u128::from(total) {
        return Err(DesignError::CertaintyUnit { what: what.to_string(), value: num as f64 / total as f64 });
    }
    Ok(f64::from(n_sampled) * size as f64 / total as f64)
}

/// Neighborhood selection probability, `n_k * NH_ki / NH_k`.
pub fn psu_prob(n_k: u32, nh_ki: u64, nh_k: u64) -> Result<f64, DesignError> {
    pps_single("neighborhood", n_k, nh_ki, nh_k)
}

/// Tract selection probability given its neighborhood, `s_ik * NH_kij / NH_ki`.
pub fn ssu_prob(s_ik: u32, nh_kij: u64, nh_ki: u64) -> Result<f64, DesignError> {
    pps_single("tract", s_ik, nh_kij, nh_ki)
}

/// Share of the tract's households that were visited.
///
/// Zero visits gives probability zero, which [`InclusionProbabilities::new`]
/// and [`base_weight`] reject.
pub fn household_prob(nv_households: u64, nh_kij: u64) -> Result<f64, DesignError> {
    if nh_kij == 0 {
        return Err(DesignError::Integrity("tract has no households".into()));
    }
    if nv_households > nh_kij {
        return Err(DesignError::Integrity(format!("{nv_households} households visited in a tract of {nh_kij}")));
    }
    Ok(nv_households as f64 / nh_kij as f64)
}

/// Tract-level response probability, valid questionnaires over visited households.
pub fn nonresponse_prob(nv_questionnaires: u64, nv_households: u64) -> Result<f64, DesignError> {
    if nv_questionnaires == 0 {
        return Err(DesignError::Integrity("tract contributed observations but has no valid questionnaires".into()));
    }
    if nv_questionnaires > nv_households {
        return Err(DesignError::Integrity(format!(
            "{nv_questionnaires} valid questionnaires from {nv_households} visited households"
        )));
    }
    Ok(nv_questionnaires as f64 / nv_households as f64)
}

/// Probability of being the drawn woman among `e_kijh` eligible ones.
pub fn woman_prob(e_kijh: u32) -> Result<f64, DesignError> {
    if e_kijh == 0 {
        return Err(DesignError::Precondition("household with an interviewed woman has no eligible women".into()));
    }
    Ok(1.0 / f64::from(e_kijh))
}

/// The five stage probabilities of one observation and their product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionProbabilities {
    pub p_psu: f64,
    pub p_ssu_given_psu: f64,
    pub p_household_given_ssu: f64,
    pub p_nonresponse: f64,
    pub p_woman_given_household: f64,
    pub p_overall: f64,
}

impl InclusionProbabilities {
    pub fn new(
        p_psu: f64,
        p_ssu_given_psu: f64,
        p_household_given_ssu: f64,
        p_nonresponse: f64,
        p_woman_given_household: f64,
    ) -> Result<Self, DesignError> {
        let parts = [p_psu, p_ssu_given_psu, p_household_given_ssu, p_nonresponse, p_woman_given_household];
        for (name, p) in ["psu", "ssu", "household", "nonresponse", "woman"].iter().zip(parts) {
            if !(p > 0.0 && p <= 1.0 + REL_TOL) {
                return Err(DesignError::Integrity(format!("{name} probability {p} outside (0, 1]")));
            }
        }
        Ok(Self {
            p_psu,
            p_ssu_given_psu,
            p_household_given_ssu,
            p_nonresponse,
            p_woman_given_household,
            p_overall: overall_prob(&parts),
        })
    }

    pub fn parts(&self) -> [f64; 5] {
        [self.p_psu, self.p_ssu_given_psu, self.p_household_given_ssu, self.p_nonresponse, self.p_woman_given_household]
    }

    pub fn base_weight(&self) -> Result<f64, DesignError> {
        base_weight(self.p_overall)
    }
}

/// Product of the stage probabilities.
pub fn overall_prob(parts: &[f64; 5]) -> f64 {
    parts.iter().product()
}

/// Reciprocal of the overall inclusion probability.
pub fn base_weight(p_overall: f64) -> Result<f64, DesignError> {
    if !(p_overall > 0.0 && p_overall <= 1.0 + REL_TOL) {
        return Err(DesignError::Integrity(format!("cannot invert inclusion probability {p_overall}")));
    }
    Ok(1.0 / p_overall)
}

/// PPS inclusion probabilities for drawing `n` of the units with the given
/// sizes. Units whose `n * size / total` reaches 1 become certainty
/// selections and the remaining sample is spread over the rest, repeatedly.
/// The returned probabilities sum to `min(n, len)`.
pub fn pps_inclusion(sizes: &[u64], n: u32) -> Result<PpsInclusion, DesignError> {
    if sizes.contains(&0) {
        return Err(DesignError::Precondition("PPS unit with zero size".into()));
    }
    let n = n as usize;
    if n >= sizes.len() {
        return Ok(PpsInclusion { probs: vec![1.0; sizes.len()], certainty: (0..sizes.len()).collect() });
    }
    let mut certain = vec![false; sizes.len()];
    loop {
        let n_left = (n - certain.iter().filter(|c| **c).count()) as u128;
        let total: u128 = sizes.iter().zip(&certain).filter(|(_, c)| !**c).map(|(s, _)| u128::from(*s)).sum();
        let mut changed = false;
        for (i, &s) in sizes.iter().enumerate() {
            if !certain[i] && n_left * u128::from(s) >= total {
                certain[i] = true;
                changed = true;
            }
        }
        if !changed {
            let probs = sizes
                .iter()
                .zip(&certain)
                .map(|(&s, &c)| if c { 1.0 } else { n_left as f64 * s as f64 / total as f64 })
                .collect();
            let certainty = certain.iter().enumerate().filter(|(_, c)| **c).map(|(i, _)| i).collect();
            return Ok(PpsInclusion { probs, certainty });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpsInclusion {
    pub probs: Vec<f64>,
    /// Indices of units taken with certainty.
    pub certainty: Vec<usize>,
}

/// Notes collected while reconstructing probabilities from field counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignDiagnostics {
    /// Units whose PPS probability was capped at 1.
    pub certainty_units: Vec<String>,
    /// Tracts with fewer than two valid questionnaires.
    pub sparse_tracts: Vec<String>,
}

/// Reconstructs the stage probabilities of every observation from the frame
/// sizes and the recorded stage counts.
/// Per-unit selection probabilities of one sampled stage, keyed by the parent
/// unit and the number of draws.
type StageCache<K> = HashMap<K, Vec<(String, f64)>>;

pub fn inclusion_probabilities(
    frame: &SamplingFrame,
    counts: &StageCountsTable,
    observations: &[Observation],
) -> Result<(Vec<InclusionProbabilities>, DesignDiagnostics), DesignError> {
    let mut diag = DesignDiagnostics::default();
    let mut psu_cache: StageCache<(String, String, u32)> = HashMap::new();
    let mut ssu_cache: StageCache<(String, String, String, u32)> = HashMap::new();
    let mut flagged: std::collections::HashSet<TractKey> = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(observations.len());

    for obs in observations {
        let key = obs.tract_key();
        let sc = counts.get(&key).ok_or_else(|| DesignError::UnknownUnit(format!("no stage counts for {key}")))?;
        let city = frame.city(&obs.city).ok_or_else(|| DesignError::UnknownUnit(format!("city {}", obs.city)))?;
        let stratum = city
            .strata
            .iter()
            .find(|s| s.id == obs.stratum)
            .ok_or_else(|| DesignError::UnknownUnit(format!("city {} stratum {}", obs.city, obs.stratum)))?;
        let nb = stratum.neighborhoods.iter().find(|n| n.id == obs.neighborhood).ok_or_else(|| {
            DesignError::UnknownUnit(format!("neighborhood {} in {}/{}", obs.neighborhood, obs.city, obs.stratum))
        })?;
        let tract = nb
            .tracts
            .iter()
            .find(|t| t.id == obs.tract)
            .ok_or_else(|| DesignError::UnknownUnit(format!("tract {key}")))?;

        let psu_probs =
            psu_cache.entry((obs.city.clone(), obs.stratum.clone(), sc.n_psu_sampled)).or_insert_with(|| {
                capped(
                    stratum.neighborhoods.iter().map(|n| (n.id.clone(), n.n_households)),
                    sc.n_psu_sampled,
                    &format!("{}/{}", obs.city, obs.stratum),
                    &mut diag,
                )
            });
        let p_psu = lookup(psu_probs, &obs.neighborhood)?;
        let ssu_probs = ssu_cache
            .entry((obs.city.clone(), obs.stratum.clone(), obs.neighborhood.clone(), sc.n_ssu_sampled))
            .or_insert_with(|| {
                capped(
                    nb.tracts.iter().map(|t| (t.id.clone(), t.n_households)),
                    sc.n_ssu_sampled,
                    &format!("{}/{}/{}", obs.city, obs.stratum, obs.neighborhood),
                    &mut diag,
                )
            });
        let p_ssu = lookup(ssu_probs, &obs.tract)?;
        let p_hh = household_prob(sc.nv_households, tract.n_households)?;
        let p_nr = nonresponse_prob(sc.nv_questionnaires, sc.nv_households)
            .map_err(|e| DesignError::Integrity(format!("{key}: {e}")))?;
        let p_w =
            woman_prob(obs.n_eligible).map_err(|e| DesignError::Precondition(format!("{}: {e}", obs.woman_id)))?;
        if sc.nv_questionnaires < 2 && flagged.insert(key.clone()) {
            diag.sparse_tracts.push(key.to_string());
        }
        out.push(InclusionProbabilities::new(p_psu, p_ssu, p_hh, p_nr, p_w)?);
    }
    Ok((out, diag))
}

fn capped(
    units: impl Iterator<Item = (String, u64)>,
    n: u32,
    scope: &str,
    diag: &mut DesignDiagnostics,
) -> Vec<(String, f64)> {
    let (ids, sizes): (Vec<String>, Vec<u64>) = units.unzip();
    let result = match pps_inclusion(&sizes, n) {
        Ok(r) => r,
        Err(_) => return ids.into_iter().map(|id| (id, f64::NAN)).collect(),
    };
    if n as usize <= sizes.len() {
        for &i in &result.certainty {
            log::debug!("{scope}: unit {} selected with certainty", ids[i]);
            diag.certainty_units.push(format!("{scope}/{}", ids[i]));
        }
    }
    ids.into_iter().zip(result.probs).collect()
}

fn lookup(probs: &[(String, f64)], id: &str) -> Result<f64, DesignError> {
    let p =
        probs.iter().find(|(k, _)| k == id).map(|(_, p)| *p).ok_or_else(|| DesignError::UnknownUnit(id.to_string()))?;
    if p.is_nan() {
        return Err(DesignError::Precondition(format!("unit {id} has a zero-size sibling")));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psu_examples() {
        assert_eq!(psu_prob(2, 100, 400).unwrap(), 0.5);
        assert_eq!(psu_prob(1, 777, 777).unwrap(), 1.0);
        assert!(matches!(psu_prob(3, 500, 1000), Err(DesignError::CertaintyUnit { .. })));
    }

    #[test]
    fn ssu_examples() {
        assert_eq!(ssu_prob(4, 50, 400).unwrap(), 0.5);
        assert_eq!(ssu_prob(1, 33, 33).unwrap(), 1.0);
        assert!(matches!(ssu_prob(12, 200, 240), Err(DesignError::CertaintyUnit { .. })));
    }

    #[test]
    fn household_examples() {
        assert!((household_prob(6, 60).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(household_prob(60, 60).unwrap(), 1.0);
        let zero = household_prob(0, 60).unwrap();
        assert!(matches!(base_weight(zero), Err(DesignError::Integrity(_))));
        assert!(InclusionProbabilities::new(1.0, 1.0, zero, 1.0, 1.0).is_err());
        assert!(matches!(household_prob(61, 60), Err(DesignError::Integrity(_))));
    }

    #[test]
    fn nonresponse_examples() {
        assert!((nonresponse_prob(8, 10).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(nonresponse_prob(10, 10).unwrap(), 1.0);
        assert!(matches!(nonresponse_prob(11, 10), Err(DesignError::Integrity(_))));
        assert!(matches!(nonresponse_prob(0, 10), Err(DesignError::Integrity(_))));
    }

    #[test]
    fn woman_examples() {
        assert_eq!(woman_prob(1).unwrap(), 1.0);
        assert_eq!(woman_prob(4).unwrap(), 0.25);
        assert!(matches!(woman_prob(0), Err(DesignError::Precondition(_))));
    }

    #[test]
    fn overall_and_base_weight() {
        assert_eq!(overall_prob(&[1.0; 5]), 1.0);
        let p = overall_prob(&[0.5, 0.5, 0.1, 0.8, 0.25]);
        assert!((p - 0.005).abs() < 1e-15);
        assert!((base_weight(p).unwrap() - 200.0).abs() < 1e-9);
        assert_eq!(base_weight(1.0).unwrap(), 1.0);
        let inc = InclusionProbabilities::new(0.5, 0.5, 0.1, 0.8, 0.25).unwrap();
        assert!((inc.p_overall - inc.parts().iter().product::<f64>()).abs() <= f64::EPSILON * inc.p_overall);
    }

    #[test]
    fn certainty_units_are_capped() {
        // 3 draws from sizes 500/250/250: the large unit is certain, then 2 of 2 left
        let r = pps_inclusion(&[500, 250, 250], 2).unwrap();
        assert_eq!(r.probs, vec![1.0, 0.5, 0.5]);
        assert_eq!(r.certainty, vec![0]);
        let r = pps_inclusion(&[600, 300, 100], 2).unwrap();
        assert_eq!(r.probs[0], 1.0);
        assert!((r.probs[1] - 0.75).abs() < 1e-15);
        assert!((r.probs[2] - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn pps_probabilities_sum_to_n(sizes in proptest::collection::vec(1u64..1000, 2..30), n in 1u32..10) {
            let r = pps_inclusion(&sizes, n).unwrap();
            let expected = (n as usize).min(sizes.len()) as f64;
            let sum: f64 = r.probs.iter().sum();
            prop_assert!((sum - expected).abs() <= REL_TOL * expected * 10.0, "sum {} n {}", sum, expected);
            prop_assert!(r.probs.iter().all(|p| *p > 0.0 && *p <= 1.0));
        }

        #[test]
        fn psu_prob_sums_over_stratum(sizes in proptest::collection::vec(100u64..200, 4..12)) {
            // sizes within a factor of two keep n_k * size / total below 1 for n_k = 2
            let total: u64 = sizes.iter().sum();
            let sum: f64 = sizes.iter().map(|&s| psu_prob(2, s, total).unwrap()).sum();
            prop_assert!((sum - 2.0).abs() <= 2.0 * 1e-12);
        }

        #[test]
        fn psu_prob_monotone(a in 1u64..500, extra in 1u64..500) {
            let total = 2000;
            prop_assert!(psu_prob(1, a + extra, total).unwrap() > psu_prob(1, a, total).unwrap());
        }
    }
}
