//! Panel attrition between waves, in-household substitution and
//! out-of-household refreshment within the wave-1 neighborhoods.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::draw::{check_listed, items_per_type, observe, visit, Visit};
use super::pps::systematic_pps;
use super::{SampleDesign, SampleRef, SimError, Wave1Sample};
use crate::design::{inclusion_probabilities, Observation, StageCounts, StageCountsTable, TractKey};
use crate::domain::Covariates;
use crate::estimate::AttritionRow;
use crate::frame::SamplingFrame;
use crate::pool::{
    default_covariate_row, estimate_overlap, fit_counterfactual, overlap_from_share, CovariateTable, HouseholdLink,
    PooledSampleMember, Source, DEFAULT_COUNTERFACTUAL_COVARIATES,
};
use crate::rng::{purpose, substream};
use crate::stats::expit;

/// Probability that a wave-1 respondent is lost before wave 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttritionModel {
    Mcar {
        rate: f64,
    },
    /// Logistic in the section-response covariates.
    Mar {
        intercept: f64,
        cohab: f64,
        know_victim: f64,
        children: f64,
    },
}

impl AttritionModel {
    pub fn probability(&self, c: &Covariates) -> f64 {
        match *self {
            Self::Mcar { rate } => rate,
            Self::Mar { intercept, cohab, know_victim, children } => {
                let [x1, x2, x3] = c.response_row();
                expit(intercept + cohab * x1 + know_victim * x2 + children * x3)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttritionConfig {
    pub model: AttritionModel,
    /// Replace a lost woman by another eligible woman of her household.
    pub in_household: bool,
    /// Refresh remaining losses from other households of the same neighborhood.
    pub refresh: bool,
}

impl Default for AttritionConfig {
    fn default() -> Self {
        Self { model: AttritionModel::Mcar { rate: 0.5 }, in_household: true, refresh: true }
    }
}

impl AttritionConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if let AttritionModel::Mcar { rate } = self.model {
            if !(0.0..=1.0).contains(&rate) {
                return Err(SimError::Config(format!("attrition rate {rate} is not a probability")));
            }
        }
        if let AttritionModel::Mar { intercept, cohab, know_victim, children } = self.model {
            if ![intercept, cohab, know_victim, children].iter().all(|v| v.is_finite()) {
                return Err(SimError::Config("attrition coefficients must be finite".into()));
            }
        }
        Ok(())
    }
}

/// A wave-2 respondent with her own-sample selection probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelMember {
    pub at: SampleRef,
    pub source: Source,
    pub in_household: bool,
    pub p_own: f64,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wave2Sample {
    /// Panel women interviewed again.
    pub nat: Vec<PanelMember>,
    /// Substitutes and refreshment interviews.
    pub re: Vec<PanelMember>,
    /// One row per city with a wave-1 interview.
    pub accounting: Vec<AttritionRow>,
    pub refresh_counts: StageCountsTable,
}

impl Wave2Sample {
    pub fn members(&self) -> impl Iterator<Item = &PanelMember> {
        self.re.iter().chain(&self.nat)
    }
}

/// Applies attrition to every wave-1 interview and refreshes the losses.
///
/// Panel women keep their wave-1 probability times the city's observed
/// retention rate. An in-household substitute has her predecessor's
/// probabilities with `1/(E-1)` for the woman stage. Refreshment redraws
/// tracts by systematic PPS inside each neighborhood that lost women and
/// visits `ceil(m/s)` households per tract, with probabilities rebuilt from
/// the new stage counts.
pub fn apply_attrition_and_refresh(
    frame: &SamplingFrame,
    wave1: &Wave1Sample,
    design: &SampleDesign,
    config: &AttritionConfig,
    seed: u64,
    rep: u64,
) -> Result<Wave2Sample, SimError> {
    check_listed(frame)?;
    config.validate()?;
    let items = items_per_type(frame);
    let (w1_probs, _) = inclusion_probabilities(frame, &wave1.counts, &wave1.observations)?;

    let mut nat = Vec::new();
    let mut re = Vec::new();
    // (city, stratum, neighborhood) -> women lost outside the household
    let mut losses: BTreeMap<(usize, usize, usize), u64> = BTreeMap::new();
    let n_cities = frame.cities.len();
    let mut tallies = vec![[0u64; 4]; n_cities]; // a, b, c, f

    for (i, (r, p)) in wave1.refs.iter().zip(&w1_probs).enumerate() {
        let mut rng = substream(seed, &[purpose::ATTRITION, rep, i as u64]);
        let woman = r.woman_of(frame);
        tallies[r.city][0] += 1;
        let lost = rng.random_bool(config.model.probability(&woman.covariates).clamp(0.0, 1.0));
        if !lost {
            let answered = rng.random_bool(woman.answer_propensity.clamp(0.0, 1.0));
            nat.push(PanelMember {
                at: *r,
                source: Source::Nat,
                in_household: false,
                p_own: p.p_overall,
                observation: observe(frame, r, answered, items),
            });
            continue;
        }
        let hh = r.household(frame);
        if config.in_household && hh.women.len() >= 2 {
            let mut pick = rng.random_range(0..hh.women.len() - 1);
            if pick >= r.woman {
                pick += 1;
            }
            let sub = SampleRef { woman: pick, ..*r };
            let answered = rng.random_bool(hh.women[pick].answer_propensity.clamp(0.0, 1.0));
            let parts = p.parts();
            let p_own = parts[..4].iter().product::<f64>() / (hh.women.len() - 1) as f64;
            tallies[r.city][2] += 1;
            re.push(PanelMember {
                at: sub,
                source: Source::Re,
                in_household: true,
                p_own,
                observation: observe(frame, &sub, answered, items),
            });
        } else {
            tallies[r.city][1] += 1;
            *losses.entry((r.city, r.stratum, r.neighborhood)).or_default() += 1;
        }
    }

    // retention applies to the wave-1 probability of every panel woman
    for m in &mut nat {
        let [a, b, c, _] = tallies[m.at.city];
        m.p_own *= (a - b - c) as f64 / a as f64;
    }

    let mut refresh_counts = StageCountsTable::new();
    let mut refreshed: Vec<(SampleRef, Observation)> = Vec::new();
    if config.refresh {
        for (&(ci, si, ni), &m) in &losses {
            let city = &frame.cities[ci];
            let stratum = &city.strata[si];
            let nb = &stratum.neighborhoods[ni];
            let n_k = (design.psus_per_stratum as usize).min(stratum.neighborhoods.len());
            let sizes: Vec<u64> = nb.tracts.iter().map(|t| t.n_households).collect();
            let s = (design.tracts_per_psu as usize).min(sizes.len());
            let per_tract = m.div_ceil(s as u64);
            let mut rng = substream(seed, &[purpose::REFRESH, rep, ci as u64, si as u64, ni as u64]);
            for ti in systematic_pps(&sizes, s, rng.random())? {
                let tract = &nb.tracts[ti];
                let nv = (per_tract as usize).min(tract.households.len());
                let mut chosen = sample_indices(&mut rng, tract.households.len(), nv).into_vec();
                chosen.sort_unstable();
                let rate = design.household_response.unwrap_or(tract.response_rate);
                let mut nvq = 0u64;
                for hi in chosen {
                    if let Visit::Interviewed { woman, answered } = visit(&tract.households[hi], rate, &mut rng) {
                        nvq += 1;
                        let r = SampleRef { city: ci, stratum: si, neighborhood: ni, tract: ti, household: hi, woman };
                        refreshed.push((r, observe(frame, &r, answered, items)));
                    }
                }
                refresh_counts.insert(
                    TractKey::new(&city.id, &stratum.id, &nb.id, &tract.id),
                    StageCounts {
                        n_psu_sampled: n_k as u32,
                        n_ssu_sampled: s as u32,
                        nv_households: nv as u64,
                        nv_questionnaires: nvq,
                    },
                );
            }
        }
    }
    let refresh_obs: Vec<Observation> = refreshed.iter().map(|(_, o)| o.clone()).collect();
    let (refresh_probs, _) = inclusion_probabilities(frame, &refresh_counts, &refresh_obs)?;
    for ((r, observation), p) in refreshed.into_iter().zip(refresh_probs) {
        tallies[r.city][3] += 1;
        re.push(PanelMember { at: r, source: Source::Re, in_household: false, p_own: p.p_overall, observation });
    }

    let accounting = frame
        .cities
        .iter()
        .zip(&tallies)
        .filter(|(_, t)| t[0] > 0)
        .map(|(c, t)| AttritionRow::new(&c.id, t[0], t[1], t[2], t[3]))
        .collect();
    Ok(Wave2Sample { nat, re, accounting, refresh_counts })
}

/// Pooled selection probabilities for every wave-2 member, RE first then NAT
/// as in [`Wave2Sample::members`].
///
/// Counterfactual probabilities come from the other sample of the same city
/// by regression on household covariates. The city's household overlap share
/// `r` becomes a per-member joint probability `r (p_own + p_other) / (1 + r)`.
pub fn pool_wave2(frame: &SamplingFrame, wave2: &Wave2Sample) -> Result<Vec<PooledSampleMember>, SimError> {
    let members: Vec<&PanelMember> = wave2.members().collect();
    let mut out: Vec<Option<PooledSampleMember>> = vec![None; members.len()];
    for ci in 0..frame.cities.len() {
        let idx: Vec<usize> = (0..members.len()).filter(|&k| members[k].at.city == ci).collect();
        if idx.is_empty() {
            continue;
        }
        let rows = |src: Source| -> Result<(Vec<usize>, CovariateTable), SimError> {
            let picked: Vec<usize> = idx.iter().copied().filter(|&k| members[k].source == src).collect();
            let rows = picked
                .iter()
                .map(|&k| {
                    let at = members[k].at;
                    default_covariate_row(at.tract_of(frame), at.household(frame))
                        .ok_or_else(|| SimError::Config("pooling needs household head covariates".into()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((picked, CovariateTable::new(&DEFAULT_COUNTERFACTUAL_COVARIATES, rows)))
        };
        let (re_idx, re_cov) = rows(Source::Re)?;
        let (nat_idx, nat_cov) = rows(Source::Nat)?;
        let p_of = |ks: &[usize]| ks.iter().map(|&k| members[k].p_own).collect::<Vec<f64>>();
        // too few members to fit on leaves the other sample's probability at zero
        let enough = |n: usize| n > DEFAULT_COUNTERFACTUAL_COVARIATES.len() + 1;
        let other_for_re = if enough(nat_idx.len()) && !re_idx.is_empty() {
            fit_counterfactual(&p_of(&nat_idx), &nat_cov, &re_cov)?.0
        } else {
            vec![0.0; re_idx.len()]
        };
        let other_for_nat = if enough(re_idx.len()) && !nat_idx.is_empty() {
            fit_counterfactual(&p_of(&re_idx), &re_cov, &nat_cov)?.0
        } else {
            vec![0.0; nat_idx.len()]
        };
        let links: Vec<HouseholdLink> = idx
            .iter()
            .map(|&k| HouseholdLink {
                household: members[k].at.household_key(frame),
                source: members[k].source,
                in_household_replacement: members[k].in_household,
            })
            .collect();
        let share = estimate_overlap(&links)?;
        for (ks, others) in [(re_idx, other_for_re), (nat_idx, other_for_nat)] {
            for (k, p_other) in ks.into_iter().zip(others) {
                let m = members[k];
                let p_other = p_other.min(1.0 - 1e-9);
                let overlap = overlap_from_share(share, m.p_own, p_other);
                out[k] = Some(PooledSampleMember::new(&m.observation.woman_id, m.source, m.p_own, p_other, overlap)?);
            }
        }
    }
    Ok(out.into_iter().map(|m| m.expect("every member belongs to a city")).collect())
}
