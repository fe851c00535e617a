//! Wave-1 selection: PSUs and tracts by systematic PPS, households by simple
//! random sampling, one woman per responding household.

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use super::pps::systematic_pps;
use super::{SampleDesign, SimError};
use crate::design::{ItemAnswers, Observation, StageCounts, StageCountsTable, TractKey};
use crate::frame::{Household, SamplingFrame, Tract, Woman};
use crate::rng::{purpose, substream};

/// Position of a sampled woman in the frame, by index at every level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleRef {
    pub city: usize,
    pub stratum: usize,
    pub neighborhood: usize,
    pub tract: usize,
    pub household: usize,
    pub woman: usize,
}

impl SampleRef {
    pub fn household<'a>(&self, frame: &'a SamplingFrame) -> &'a Household {
        &self.tract_of(frame).households[self.household]
    }

    pub fn tract_of<'a>(&self, frame: &'a SamplingFrame) -> &'a Tract {
        &frame.cities[self.city].strata[self.stratum].neighborhoods[self.neighborhood].tracts[self.tract]
    }

    pub fn woman_of<'a>(&self, frame: &'a SamplingFrame) -> &'a Woman {
        &self.household(frame).women[self.woman]
    }

    /// Frame-wide household identifier.
    pub fn household_key(&self, frame: &SamplingFrame) -> String {
        format!("{}/{}", tract_key(frame, self), self.household(frame).id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wave1Sample {
    pub observations: Vec<Observation>,
    /// Frame position of each observation.
    pub refs: Vec<SampleRef>,
    pub counts: StageCountsTable,
    /// Selected tracts as `[city, stratum, neighborhood, tract]` indices.
    pub tracts: Vec<[usize; 4]>,
}

impl Wave1Sample {
    /// Observations per city index, as index lists into `observations`.
    pub fn by_city(&self, n_cities: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_cities];
        for (i, r) in self.refs.iter().enumerate() {
            out[r.city].push(i);
        }
        out
    }
}

fn tract_key(frame: &SamplingFrame, r: &SampleRef) -> TractKey {
    let c = &frame.cities[r.city];
    let s = &c.strata[r.stratum];
    let n = &s.neighborhoods[r.neighborhood];
    TractKey::new(&c.id, &s.id, &n.id, &n.tracts[r.tract].id)
}

/// Turns a frame woman into a respondent record. Items are missing unless she
/// answered the violence section.
pub(crate) fn observe(frame: &SamplingFrame, r: &SampleRef, answered: bool, items_per_type: [usize; 3]) -> Observation {
    let key = tract_key(frame, r);
    let hh = r.household(frame);
    let w = &hh.women[r.woman];
    let items = if answered {
        ItemAnswers(std::array::from_fn(|k| w.items[k].iter().map(|x| Some(*x)).collect()))
    } else {
        ItemAnswers::missing(items_per_type)
    };
    Observation {
        woman_id: format!("{key}/{}/{}", hh.id, w.id),
        city: key.city,
        stratum: key.stratum,
        neighborhood: key.neighborhood,
        tract: key.tract,
        household: hh.id.clone(),
        n_eligible: hh.n_eligible_women,
        answered_violence: answered,
        covariates: w.covariates,
        items,
    }
}

pub(crate) fn items_per_type(frame: &SamplingFrame) -> [usize; 3] {
    let mut out = [1, 1, 1];
    if let Some(w) = frame.women().next() {
        for (t, slot) in out.iter_mut().enumerate() {
            *slot = w.items[2 * t].len();
        }
    }
    out
}

/// Outcome of visiting one household.
pub(crate) enum Visit {
    NoEligibleWoman,
    Refused,
    Interviewed { woman: usize, answered: bool },
}

pub(crate) fn visit<R: Rng>(hh: &Household, response_rate: f64, rng: &mut R) -> Visit {
    if hh.n_eligible_women == 0 {
        return Visit::NoEligibleWoman;
    }
    if !rng.random_bool(response_rate) {
        return Visit::Refused;
    }
    let woman = rng.random_range(0..hh.women.len());
    let answered = rng.random_bool(hh.women[woman].answer_propensity.clamp(0.0, 1.0));
    Visit::Interviewed { woman, answered }
}

pub(crate) fn check_listed(frame: &SamplingFrame) -> Result<(), SimError> {
    let listed =
        frame.cities.iter().flat_map(|c| &c.strata).flat_map(|s| &s.neighborhoods).flat_map(|n| &n.tracts).all(|t| {
            t.households.len() as u64 == t.n_households
                && t.households.iter().all(|h| h.women.len() as u32 == h.n_eligible_women)
        });
    if !listed {
        return Err(SimError::Config("sampling requires a frame that lists every household and woman".into()));
    }
    Ok(())
}

/// Draws the wave-1 sample of replicate `rep`. Every selected tract gets a
/// stage-count row, so the design module can rebuild the probabilities.
pub fn draw_wave1(frame: &SamplingFrame, design: &SampleDesign, seed: u64, rep: u64) -> Result<Wave1Sample, SimError> {
    check_listed(frame)?;
    let items = items_per_type(frame);
    let mut out =
        Wave1Sample { observations: Vec::new(), refs: Vec::new(), counts: StageCountsTable::new(), tracts: Vec::new() };

    for (ci, city) in frame.cities.iter().enumerate() {
        for (si, stratum) in city.strata.iter().enumerate() {
            let sizes: Vec<u64> = stratum.neighborhoods.iter().map(|n| n.n_households).collect();
            let n_k = (design.psus_per_stratum as usize).min(sizes.len());
            let mut rng = substream(seed, &[purpose::DRAW_PSU, rep, ci as u64, si as u64]);
            let psus = systematic_pps(&sizes, n_k, rng.random())?;

            for &ni in &psus {
                let nb = &stratum.neighborhoods[ni];
                let tract_sizes: Vec<u64> = nb.tracts.iter().map(|t| t.n_households).collect();
                let s = (design.tracts_per_psu as usize).min(tract_sizes.len());
                let mut trng = substream(seed, &[purpose::DRAW_TRACT, rep, ci as u64, si as u64, ni as u64]);
                let tracts = systematic_pps(&tract_sizes, s, trng.random())?;

                for &ti in &tracts {
                    let tract = &nb.tracts[ti];
                    let mut hrng =
                        substream(seed, &[purpose::DRAW_HOUSEHOLD, rep, ci as u64, si as u64, ni as u64, ti as u64]);
                    let nv = (design.visits_per_tract.sample(&mut hrng) as usize).min(tract.households.len());
                    let mut chosen = sample_indices(&mut hrng, tract.households.len(), nv).into_vec();
                    chosen.sort_unstable();
                    let rate = design.household_response.unwrap_or(tract.response_rate);
                    let mut nvq = 0u64;
                    for hi in chosen {
                        if let Visit::Interviewed { woman, answered } = visit(&tract.households[hi], rate, &mut hrng) {
                            nvq += 1;
                            let r =
                                SampleRef { city: ci, stratum: si, neighborhood: ni, tract: ti, household: hi, woman };
                            out.observations.push(observe(frame, &r, answered, items));
                            out.refs.push(r);
                        }
                    }
                    out.counts.insert(
                        TractKey::new(&city.id, &stratum.id, &nb.id, &tract.id),
                        StageCounts {
                            n_psu_sampled: n_k as u32,
                            n_ssu_sampled: s as u32,
                            nv_households: nv as u64,
                            nv_questionnaires: nvq,
                        },
                    );
                    out.tracts.push([ci, si, ni, ti]);
                }
            }
        }
    }
    Ok(out)
}
