//! Exact enumeration of every sample path of a small design.

use serde::{Deserialize, Serialize};

use super::pps::systematic_pps_outcomes;
use super::SimError;
use crate::design::{household_prob, nonresponse_prob, pps_inclusion, woman_prob, InclusionProbabilities};
use crate::domain::{AgeGroup, Covariates, Education, Outcome, Race, ViolenceType, Window};
use crate::frame::{City, Household, Neighborhood, SamplingFrame, Stratum, Tract, Woman};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    pub psus_per_stratum: u32,
    pub tracts_per_psu: u32,
    /// Households visited per selected tract; all of them respond.
    pub visits_per_tract: u32,
    pub outcome: Outcome,
    pub max_outcomes: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            psus_per_stratum: 1,
            tracts_per_psu: 1,
            visits_per_tract: 2,
            outcome: Outcome::new(ViolenceType::Emotional, Window::Lifetime),
            max_outcomes: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WomanInclusion {
    pub at: (usize, usize, usize, usize, usize, usize),
    /// Total probability of the sample paths that contain her.
    pub enumerated: f64,
    /// Product of the stage probabilities.
    pub formula: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub n_outcomes: usize,
    pub total_probability: f64,
    pub women: Vec<WomanInclusion>,
    /// Population mean of the outcome indicator.
    pub truth: f64,
    /// Mean and variance of the Horvitz-Thompson estimator of the population
    /// mean over all sample paths.
    pub ht_mean: f64,
    pub ht_variance: f64,
}

impl ExactResult {
    pub fn max_abs_inclusion_error(&self) -> f64 {
        self.women.iter().map(|w| (w.enumerated - w.formula).abs()).fold(0.0, f64::max)
    }
}

/// Sample paths of one unit, as (probability, selected women).
type Dist = Vec<(f64, Vec<usize>)>;

fn product(a: &Dist, b: &Dist, limit: usize) -> Result<Dist, SimError> {
    let size = a.len().saturating_mul(b.len());
    if size > limit {
        return Err(SimError::SampleSpaceTooLarge { outcomes: a.len() as f64 * b.len() as f64, limit });
    }
    let mut out = Vec::with_capacity(size);
    for (pa, wa) in a {
        for (pb, wb) in b {
            let mut w = wa.clone();
            w.extend_from_slice(wb);
            out.push((pa * pb, w));
        }
    }
    Ok(out)
}

fn product_all(parts: &[Dist], limit: usize) -> Result<Dist, SimError> {
    let mut acc: Dist = vec![(1.0, Vec::new())];
    for p in parts {
        acc = product(&acc, p, limit)?;
    }
    Ok(acc)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Enumerates the full sample space under full response and returns exact
/// inclusion probabilities next to the stage-probability products, plus the
/// exact distribution moments of the Horvitz-Thompson mean.
pub fn enumerate_exact(frame: &SamplingFrame, cfg: &ExactConfig) -> Result<ExactResult, SimError> {
    if cfg.psus_per_stratum == 0 || cfg.tracts_per_psu == 0 || cfg.visits_per_tract == 0 {
        return Err(SimError::Config("exact enumeration needs positive sample sizes".into()));
    }
    let limit = cfg.max_outcomes;
    let mut women: Vec<WomanInclusion> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    let mut strata_dists: Vec<Dist> = Vec::new();

    for (ci, city) in frame.cities.iter().enumerate() {
        for (si, stratum) in city.strata.iter().enumerate() {
            let nb_sizes: Vec<u64> = stratum.neighborhoods.iter().map(|n| n.n_households).collect();
            let n_k = (cfg.psus_per_stratum as usize).min(nb_sizes.len());
            let p_psu = pps_inclusion(&nb_sizes, n_k as u32)?.probs;
            let mut nb_dists: Vec<Dist> = Vec::new();
            for (ni, nb) in stratum.neighborhoods.iter().enumerate() {
                let tract_sizes: Vec<u64> = nb.tracts.iter().map(|t| t.n_households).collect();
                let s = (cfg.tracts_per_psu as usize).min(tract_sizes.len());
                let p_ssu = pps_inclusion(&tract_sizes, s as u32)?.probs;
                let mut tract_dists: Vec<Dist> = Vec::new();
                for (ti, tract) in nb.tracts.iter().enumerate() {
                    if tract.response_rate < 1.0 {
                        return Err(SimError::Config(format!("tract {} has response rate below 1", tract.id)));
                    }
                    let nh = tract.households.len();
                    if nh as u64 != tract.n_households {
                        return Err(SimError::Config("exact enumeration needs listed households".into()));
                    }
                    let nv = (cfg.visits_per_tract as usize).min(nh);
                    let p_hh = household_prob(nv as u64, nh as u64)?;
                    let p_nr = nonresponse_prob(nv as u64, nv as u64)?;
                    let mut hh_dists: Vec<Dist> = Vec::new();
                    for (hi, hh) in tract.households.iter().enumerate() {
                        if hh.women.is_empty() || hh.women.len() as u32 != hh.n_eligible_women {
                            return Err(SimError::Config(format!(
                                "household {} must list at least one eligible woman",
                                hh.id
                            )));
                        }
                        let p_w = woman_prob(hh.n_eligible_women)?;
                        let mut d = Dist::new();
                        for (wi, w) in hh.women.iter().enumerate() {
                            let formula = InclusionProbabilities::new(p_psu[ni], p_ssu[ti], p_hh, p_nr, p_w)?.p_overall;
                            d.push((p_w, vec![women.len()]));
                            women.push(WomanInclusion { at: (ci, si, ni, ti, hi, wi), enumerated: 0.0, formula });
                            y.push(f64::from(u8::from(w.is_victim(cfg.outcome))));
                        }
                        hh_dists.push(d);
                    }
                    let mut dist = Dist::new();
                    for combo in combinations(nh, nv) {
                        let chosen: Vec<Dist> = combo.iter().map(|&h| hh_dists[h].clone()).collect();
                        let p = 1.0 / combinations_count(nh, nv);
                        dist.extend(product_all(&chosen, limit)?.into_iter().map(|(q, w)| (p * q, w)));
                    }
                    tract_dists.push(dist);
                }
                let mut dist = Dist::new();
                for (p, sel) in systematic_pps_outcomes(&tract_sizes, s)? {
                    let chosen: Vec<Dist> = sel.iter().map(|&t| tract_dists[t].clone()).collect();
                    dist.extend(product_all(&chosen, limit)?.into_iter().map(|(q, w)| (p * q, w)));
                }
                nb_dists.push(dist);
            }
            let mut dist = Dist::new();
            for (p, sel) in systematic_pps_outcomes(&nb_sizes, n_k)? {
                let chosen: Vec<Dist> = sel.iter().map(|&n| nb_dists[n].clone()).collect();
                dist.extend(product_all(&chosen, limit)?.into_iter().map(|(q, w)| (p * q, w)));
            }
            strata_dists.push(dist);
        }
    }

    let total: f64 = strata_dists.iter().map(|d| d.len() as f64).product();
    if total > limit as f64 {
        return Err(SimError::SampleSpaceTooLarge { outcomes: total, limit });
    }
    let n_pop = women.len() as f64;
    let truth = y.iter().sum::<f64>() / n_pop;
    let contrib: Vec<f64> = women.iter().zip(&y).map(|(w, y)| y / w.formula / n_pop).collect();

    // odometer over the strata
    let mut digits = vec![0usize; strata_dists.len()];
    let (mut total_p, mut m1, mut m2, mut count) = (0.0, 0.0, 0.0, 0usize);
    let mut freq = vec![0.0; women.len()];
    loop {
        let mut p = 1.0;
        let mut ht = 0.0;
        for (d, &k) in strata_dists.iter().zip(&digits) {
            p *= d[k].0;
        }
        for (d, &k) in strata_dists.iter().zip(&digits) {
            for &w in &d[k].1 {
                freq[w] += p;
                ht += contrib[w];
            }
        }
        total_p += p;
        m1 += p * ht;
        m2 += p * ht * ht;
        count += 1;
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                for (w, f) in women.iter_mut().zip(freq) {
                    w.enumerated = f;
                }
                return Ok(ExactResult {
                    n_outcomes: count,
                    total_probability: total_p,
                    women,
                    truth,
                    ht_mean: m1,
                    ht_variance: m2 - m1 * m1,
                });
            }
            digits[pos] += 1;
            if digits[pos] < strata_dists[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

fn combinations_count(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// A hand-built frame small enough to enumerate: one city, four strata of two
/// neighborhoods, two tracts each with two or three households, and one or two
/// eligible women per household. Every tract responds fully.
pub fn micro_frame() -> SamplingFrame {
    let covariates = Covariates {
        cohab: true,
        know_victim: false,
        children: true,
        age_group: AgeGroup::Adult,
        race: Race::NonWhite,
        education: Education::HighSchool,
    };
    let mut serial = 0usize;
    let strata = (0..4)
        .map(|k| Stratum {
            id: (k + 1).to_string(),
            neighborhoods: (0..2)
                .map(|j| {
                    let tracts: Vec<Tract> = (0..2)
                        .map(|t| {
                            let nh = 2 + (k + j + t) % 2;
                            let households = (0..nh)
                                .map(|h| {
                                    let e = if h == 0 && (k + j + t) % 3 == 0 { 2 } else { 1 };
                                    let women = (0..e)
                                        .map(|w| {
                                            serial += 1;
                                            let victim = serial % 3 == 1;
                                            Woman {
                                                id: format!("W{}", w + 1),
                                                covariates,
                                                latent: [victim; 6],
                                                items: vec![vec![victim]; 6],
                                                answer_propensity: 1.0,
                                            }
                                        })
                                        .collect();
                                    Household { id: format!("H{}", h + 1), n_eligible_women: e, head: None, women }
                                })
                                .collect();
                            Tract { id: format!("T{}", t + 1), n_households: nh as u64, households, response_rate: 1.0 }
                        })
                        .collect();
                    Neighborhood {
                        id: format!("N{}{}", k + 1, j + 1),
                        n_households: tracts.iter().map(|t| t.n_households).sum(),
                        tracts,
                    }
                })
                .collect(),
        })
        .collect();
    let mut frame = SamplingFrame { cities: vec![City { id: "C1".into(), strata }], truth: None };
    frame.truth = Some(frame.enumerate_prevalence());
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::CountRange;
    use crate::sim::{draw_wave1, SampleDesign, SampleRef};
    use std::collections::HashMap;

    #[test]
    fn micro_frame_is_valid_and_small() {
        let f = micro_frame();
        f.validate().unwrap();
        let r = enumerate_exact(&f, &ExactConfig::default()).unwrap();
        assert!(r.n_outcomes > 1000 && r.n_outcomes <= 1_000_000, "{}", r.n_outcomes);
        assert!((r.total_probability - 1.0).abs() < 1e-12);
        assert!(r.max_abs_inclusion_error() < 1e-12);
        assert!((r.ht_mean - r.truth).abs() < 1e-12);
        assert!(r.ht_variance > 0.0);
    }

    #[test]
    fn two_equal_psus_halve_downstream_probability() {
        let mut f = micro_frame();
        f.cities[0].strata.truncate(1);
        for nb in &mut f.cities[0].strata[0].neighborhoods {
            nb.tracts.truncate(1);
            nb.tracts[0].households.truncate(2);
            nb.tracts[0].n_households = 2;
            nb.n_households = 2;
            for hh in &mut nb.tracts[0].households {
                hh.women.truncate(1);
                hh.n_eligible_women = 1;
            }
        }
        let r = enumerate_exact(&f, &ExactConfig { visits_per_tract: 1, ..Default::default() }).unwrap();
        // PSU 1/2, tract 1, household 1/2, woman 1
        assert_eq!(r.n_outcomes, 4);
        for w in &r.women {
            assert!((w.enumerated - 0.25).abs() < 1e-15);
            assert!((w.formula - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn limit_is_enforced() {
        let cfg = ExactConfig { max_outcomes: 100, ..Default::default() };
        assert!(matches!(enumerate_exact(&micro_frame(), &cfg), Err(SimError::SampleSpaceTooLarge { .. })));
    }

    #[test]
    fn partial_response_rejected() {
        let mut f = micro_frame();
        f.cities[0].strata[0].neighborhoods[0].tracts[0].response_rate = 0.5;
        assert!(matches!(enumerate_exact(&f, &ExactConfig::default()), Err(SimError::Config(_))));
    }

    #[test]
    fn draw_frequencies_agree_with_enumeration() {
        let f = micro_frame();
        let r = enumerate_exact(&f, &ExactConfig::default()).unwrap();
        let design = SampleDesign {
            psus_per_stratum: 1,
            tracts_per_psu: 1,
            visits_per_tract: CountRange::fixed(2),
            household_response: None,
        };
        let reps = 10_000u64;
        let mut hits: HashMap<SampleRef, u64> = HashMap::new();
        for rep in 0..reps {
            for at in draw_wave1(&f, &design, 99, rep).unwrap().refs {
                *hits.entry(at).or_default() += 1;
            }
        }
        for w in &r.women {
            let (city, stratum, neighborhood, tract, household, woman) = w.at;
            let key = SampleRef { city, stratum, neighborhood, tract, household, woman };
            let freq = *hits.get(&key).unwrap_or(&0) as f64 / reps as f64;
            let se = (w.enumerated * (1.0 - w.enumerated) / reps as f64).sqrt();
            assert!((freq - w.enumerated).abs() <= 3.0 * se, "{key:?}: {freq} vs {}", w.enumerated);
        }
    }
}
