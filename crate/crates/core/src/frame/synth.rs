//! Seeded synthetic populations with known prevalences.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    build_strata, City, FrameError, HeadOfHousehold, Household, Neighborhood, SamplingFrame, Stratum, Tract, Woman,
};
use crate::domain::{AgeGroup, Covariates, Education, Outcome, Race, ViolenceType, Window};
use crate::rng::{purpose, substream};
use crate::stats::expit;

/// Inclusive integer range; `min == max` means a fixed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

impl CountRange {
    pub const fn fixed(n: u32) -> Self {
        Self { min: n, max: n }
    }

    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn check(&self, what: &str, min_allowed: u32) -> Result<(), FrameError> {
        if self.min > self.max || self.min < min_allowed {
            return Err(FrameError::Config(format!(
                "{what}: invalid range [{}, {}] (minimum {min_allowed})",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Number of eligible women per household: zero with probability `p_zero`,
/// otherwise `1 + Poisson(mean_extra)` truncated at `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EligibleWomenModel {
    pub p_zero: f64,
    pub mean_extra: f64,
    pub max: u32,
}

impl Default for EligibleWomenModel {
    fn default() -> Self {
        Self { p_zero: 0.1, mean_extra: 0.4, max: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateModel {
    pub p_cohab: f64,
    pub p_know_victim: f64,
    pub p_children: f64,
    pub p_young: f64,
    pub p_white: f64,
    /// Elementary, high school, undergraduate.
    pub p_education: [f64; 3],
}

impl Default for CovariateModel {
    fn default() -> Self {
        Self {
            p_cohab: 0.55,
            p_know_victim: 0.3,
            p_children: 0.65,
            p_young: 0.45,
            p_white: 0.3,
            p_education: [0.4, 0.45, 0.15],
        }
    }
}

/// Log-odds effects on the latent lifetime victim status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizes {
    pub cohab: f64,
    pub know_victim: f64,
    pub children: f64,
    pub young: f64,
    /// Per additional eligible woman in the household.
    pub household_size: f64,
    /// Standard deviation of a tract-level random intercept.
    pub tract_sd: f64,
}

impl Default for EffectSizes {
    fn default() -> Self {
        Self { cohab: 0.4, know_victim: 0.8, children: 0.2, young: 0.0, household_size: -0.3, tract_sd: 0.3 }
    }
}

impl EffectSizes {
    pub fn none() -> Self {
        Self { cohab: 0.0, know_victim: 0.0, children: 0.0, young: 0.0, household_size: 0.0, tract_sd: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPair {
    pub lifetime: f64,
    pub last_12m: f64,
}

/// Target population prevalence per violence type and window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTargets {
    pub emotional: TargetPair,
    pub physical: TargetPair,
    pub sexual: TargetPair,
}

impl Default for OutcomeTargets {
    fn default() -> Self {
        Self {
            emotional: TargetPair { lifetime: 0.30, last_12m: 0.14 },
            physical: TargetPair { lifetime: 0.19, last_12m: 0.06 },
            sexual: TargetPair { lifetime: 0.08, last_12m: 0.026 },
        }
    }
}

impl OutcomeTargets {
    pub fn pair(&self, vtype: ViolenceType) -> TargetPair {
        match vtype {
            ViolenceType::Emotional => self.emotional,
            ViolenceType::Physical => self.physical,
            ViolenceType::Sexual => self.sexual,
        }
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        let p = self.pair(outcome.vtype);
        match outcome.window {
            Window::Lifetime => p.lifetime,
            Window::Last12Months => p.last_12m,
        }
    }

    pub fn uniform(p: f64) -> Self {
        let pair = TargetPair { lifetime: p, last_12m: p };
        Self { emotional: pair, physical: pair, sexual: pair }
    }
}

/// Logistic model for answering the violence section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub intercept: f64,
    pub cohab: f64,
    pub know_victim: f64,
    pub children: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        Self { intercept: 1.6, cohab: -0.4, know_victim: 0.3, children: -0.2 }
    }
}

impl ResponseModel {
    pub fn constant(p: f64) -> Self {
        Self { intercept: crate::stats::logit(p), cohab: 0.0, know_victim: 0.0, children: 0.0 }
    }

    pub fn probability(&self, c: &Covariates) -> f64 {
        let [cohab, know, kids] = c.response_row();
        expit(self.intercept + self.cohab * cohab + self.know_victim * know + self.children * kids)
    }
}

/// Parameters of a synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameGenConfig {
    pub seed: u64,
    pub n_cities: u32,
    /// Neighborhoods per city.
    pub n_neighborhoods: u32,
    pub tracts_per_neighborhood: CountRange,
    pub households_per_tract: CountRange,
    pub eligible_women: EligibleWomenModel,
    pub covariates: CovariateModel,
    pub prevalence: OutcomeTargets,
    pub effects: EffectSizes,
    pub section_response: ResponseModel,
    /// Household questionnaire response rate, drawn uniformly per tract.
    pub household_response: [f64; 2],
    /// Number of items per recall window for emotional, physical, sexual.
    pub items: [usize; 3],
}

impl Default for FrameGenConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_cities: 1,
            n_neighborhoods: 40,
            tracts_per_neighborhood: CountRange::new(4, 8),
            households_per_tract: CountRange::new(40, 120),
            eligible_women: EligibleWomenModel::default(),
            covariates: CovariateModel::default(),
            prevalence: OutcomeTargets::default(),
            effects: EffectSizes::default(),
            section_response: ResponseModel::default(),
            household_response: [0.7, 0.95],
            items: [
                ViolenceType::Emotional.default_items(),
                ViolenceType::Physical.default_items(),
                ViolenceType::Sexual.default_items(),
            ],
        }
    }
}

fn check_prob(what: &str, p: f64) -> Result<(), FrameError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(FrameError::Config(format!("{what} = {p} is not a probability")));
    }
    Ok(())
}

impl FrameGenConfig {
    pub fn validate(&self) -> Result<(), FrameError> {
        if self.n_cities == 0 {
            return Err(FrameError::Config("n_cities must be at least 1".into()));
        }
        if self.n_neighborhoods < 4 {
            return Err(FrameError::Config("n_neighborhoods must be at least 4".into()));
        }
        self.tracts_per_neighborhood.check("tracts_per_neighborhood", 1)?;
        self.households_per_tract.check("households_per_tract", 1)?;
        let e = &self.eligible_women;
        check_prob("eligible_women.p_zero", e.p_zero)?;
        if e.p_zero >= 1.0 || e.max == 0 || !(e.mean_extra >= 0.0) || !e.mean_extra.is_finite() {
            return Err(FrameError::Config("degenerate eligible-women distribution".into()));
        }
        let c = &self.covariates;
        for (name, p) in [
            ("p_cohab", c.p_cohab),
            ("p_know_victim", c.p_know_victim),
            ("p_children", c.p_children),
            ("p_young", c.p_young),
            ("p_white", c.p_white),
        ] {
            check_prob(name, p)?;
        }
        for p in c.p_education {
            check_prob("p_education", p)?;
        }
        if (c.p_education.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(FrameError::Config("p_education must sum to 1".into()));
        }
        for vtype in ViolenceType::ALL {
            let pair = self.prevalence.pair(vtype);
            check_prob("lifetime prevalence", pair.lifetime)?;
            check_prob("12-month prevalence", pair.last_12m)?;
            if pair.last_12m > pair.lifetime {
                return Err(FrameError::Config(format!(
                    "{} 12-month prevalence exceeds lifetime prevalence",
                    vtype.as_str()
                )));
            }
        }
        let [lo, hi] = self.household_response;
        check_prob("household_response", lo)?;
        check_prob("household_response", hi)?;
        if lo > hi {
            return Err(FrameError::Config("household_response range is reversed".into()));
        }
        if self.effects.tract_sd < 0.0 || !self.effects.tract_sd.is_finite() {
            return Err(FrameError::Config("effects.tract_sd must be nonnegative".into()));
        }
        if self.items.contains(&0) {
            return Err(FrameError::Config("every item set needs at least one item".into()));
        }
        Ok(())
    }
}

/// Generates a frame deterministically from `config.seed`.
///
/// Household structure, covariates and tract effects come from per-unit
/// substreams. Each lifetime outcome gets a frame-wide intercept solved so that
/// the mean model probability equals the configured prevalence; latent flags
/// are then Bernoulli draws, and 12-month flags thin the lifetime flags by the
/// ratio of the two targets.
pub fn generate_synthetic_frame(config: &FrameGenConfig) -> Result<SamplingFrame, FrameError> {
    config.validate()?;
    let seed = config.seed;
    let mut cities = Vec::with_capacity(config.n_cities as usize);
    let mut tract_effects: HashMap<(usize, String, String), f64> = HashMap::new();

    for c in 0..config.n_cities as u64 {
        let mut neighborhoods = Vec::with_capacity(config.n_neighborhoods as usize);
        for n in 0..config.n_neighborhoods as u64 {
            let mut rng = substream(seed, &[purpose::FRAME_NEIGHBORHOOD, c, n]);
            let n_tracts = config.tracts_per_neighborhood.sample(&mut rng);
            let mut tracts = Vec::with_capacity(n_tracts as usize);
            for t in 0..n_tracts as u64 {
                let mut trng = substream(seed, &[purpose::FRAME_TRACT, c, n, t]);
                let n_hh = config.households_per_tract.sample(&mut trng);
                let [lo, hi] = config.household_response;
                let response_rate = if lo == hi { lo } else { trng.random_range(lo..=hi) };
                let tract_effect = if config.effects.tract_sd > 0.0 {
                    Normal::new(0.0, config.effects.tract_sd).expect("validated sd").sample(&mut trng)
                } else {
                    0.0
                };
                let households = (0..n_hh as u64)
                    .map(|h| {
                        let mut hrng = substream(seed, &[purpose::FRAME_HOUSEHOLD, c, n, t, h]);
                        synth_household(config, &mut hrng, h)
                    })
                    .collect::<Vec<_>>();
                let id = format!("T{:02}", t + 1);
                tract_effects.insert((c as usize, format!("N{:03}", n + 1), id.clone()), tract_effect);
                tracts.push(Tract { id, n_households: u64::from(n_hh), households, response_rate });
            }
            neighborhoods.push(Neighborhood {
                id: format!("N{:03}", n + 1),
                n_households: tracts.iter().map(|t| t.n_households).sum(),
                tracts,
            });
        }

        let sizes: Vec<(String, u64)> = neighborhoods.iter().map(|n| (n.id.clone(), n.n_households)).collect();
        let groups = build_strata(&sizes)?;
        let mut by_id: HashMap<String, Neighborhood> = neighborhoods.into_iter().map(|n| (n.id.clone(), n)).collect();
        let strata = groups
            .into_iter()
            .enumerate()
            .map(|(k, group)| Stratum {
                id: (k + 1).to_string(),
                neighborhoods: group.into_iter().map(|(id, _)| by_id.remove(&id).expect("stratified id")).collect(),
            })
            .collect();
        cities.push(City { id: format!("C{}", c + 1), strata });
    }

    assign_outcomes(config, &mut cities, &tract_effects);

    let mut frame = SamplingFrame { cities, truth: None };
    frame.truth = Some(frame.enumerate_prevalence());
    frame.validate()?;
    Ok(frame)
}

fn synth_household<R: Rng>(config: &FrameGenConfig, rng: &mut R, h: u64) -> Household {
    let e = &config.eligible_women;
    let n_eligible = if rng.random_bool(e.p_zero) {
        0
    } else {
        let extra =
            if e.mean_extra > 0.0 { Poisson::new(e.mean_extra).expect("validated mean").sample(rng) as u32 } else { 0 };
        (1 + extra).min(e.max)
    };
    let cm = &config.covariates;
    let education = |rng: &mut R| {
        let u: f64 = rng.random();
        if u < cm.p_education[0] {
            Education::Elementary
        } else if u < cm.p_education[0] + cm.p_education[1] {
            Education::HighSchool
        } else {
            Education::Undergraduate
        }
    };
    let head =
        HeadOfHousehold { age: rng.random_range(22..=75), education: education(rng), female: rng.random_bool(0.45) };
    let women = (0..n_eligible)
        .map(|w| {
            let covariates = Covariates {
                cohab: rng.random_bool(cm.p_cohab),
                know_victim: rng.random_bool(cm.p_know_victim),
                children: rng.random_bool(cm.p_children),
                age_group: if rng.random_bool(cm.p_young) { AgeGroup::Young } else { AgeGroup::Adult },
                race: if rng.random_bool(cm.p_white) { Race::White } else { Race::NonWhite },
                education: education(rng),
            };
            Woman {
                id: format!("W{}", w + 1),
                answer_propensity: config.section_response.probability(&covariates),
                covariates,
                latent: [false; 6],
                items: Vec::new(),
            }
        })
        .collect();
    Household { id: format!("H{:03}", h + 1), n_eligible_women: n_eligible, head: Some(head), women }
}

fn linear_predictor(config: &FrameGenConfig, c: &Covariates, n_eligible: u32, tract_effect: f64) -> f64 {
    let fx = &config.effects;
    let b = |flag: bool| f64::from(u8::from(flag));
    fx.cohab * b(c.cohab)
        + fx.know_victim * b(c.know_victim)
        + fx.children * b(c.children)
        + fx.young * b(c.age_group == AgeGroup::Young)
        + fx.household_size * f64::from(n_eligible.saturating_sub(1))
        + tract_effect
}

/// Intercept such that the mean of `expit(intercept + eta)` equals `target`.
fn calibrate_intercept(eta: &[f64], target: f64) -> f64 {
    let mean_p = |a: f64| eta.iter().map(|e| expit(a + e)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn assign_outcomes(
    config: &FrameGenConfig,
    cities: &mut [City],
    tract_effects: &HashMap<(usize, String, String), f64>,
) {
    let mut eta = Vec::new();
    for (ci, city) in cities.iter().enumerate() {
        for nb in city.strata.iter().flat_map(|s| &s.neighborhoods) {
            for t in &nb.tracts {
                let effect = tract_effects[&(ci, nb.id.clone(), t.id.clone())];
                for h in &t.households {
                    for w in &h.women {
                        eta.push(linear_predictor(config, &w.covariates, h.n_eligible_women, effect));
                    }
                }
            }
        }
    }

    let intercepts: Vec<Option<f64>> = ViolenceType::ALL
        .iter()
        .map(|&v| {
            let target = config.prevalence.pair(v).lifetime;
            if target <= 0.0 || target >= 1.0 || eta.is_empty() {
                None
            } else {
                Some(calibrate_intercept(&eta, target))
            }
        })
        .collect();

    let seed = config.seed;
    let mut eta = eta.into_iter();
    for (ci, city) in cities.iter_mut().enumerate() {
        for nb in city.strata.iter_mut().flat_map(|s| s.neighborhoods.iter_mut()) {
            let nb_key = id_number(&nb.id);
            for t in &mut nb.tracts {
                let t_key = id_number(&t.id);
                for h in &mut t.households {
                    let h_key = id_number(&h.id);
                    for (wi, w) in h.women.iter_mut().enumerate() {
                        let path = [purpose::FRAME_OUTCOME, ci as u64, nb_key, t_key, h_key, wi as u64];
                        let mut rng = substream(seed, &path);
                        let e = eta.next().expect("one predictor per woman");
                        draw_outcomes(config, &intercepts, e, w, &mut rng);
                    }
                }
            }
        }
    }
}

fn id_number(id: &str) -> u64 {
    id.trim_start_matches(|c: char| !c.is_ascii_digit()).parse().unwrap_or(0)
}

fn draw_outcomes<R: Rng>(config: &FrameGenConfig, intercepts: &[Option<f64>], eta: f64, w: &mut Woman, rng: &mut R) {
    let mut items = vec![Vec::new(); 6];
    for (v, vtype) in ViolenceType::ALL.iter().enumerate() {
        let pair = config.prevalence.pair(*vtype);
        let p_life = match intercepts[v] {
            Some(a) => expit(a + eta),
            None => pair.lifetime,
        };
        let lifetime = rng.random::<f64>() < p_life;
        let thin = if pair.lifetime > 0.0 { pair.last_12m / pair.lifetime } else { 0.0 };
        let recent = lifetime && rng.random::<f64>() < thin;
        let n_items = config.items[v];
        for (window, flag) in [(Window::Lifetime, lifetime), (Window::Last12Months, recent)] {
            let k = Outcome::new(*vtype, window).index();
            w.latent[k] = flag;
            items[k] = item_answers(n_items, flag, rng);
        }
    }
    w.items = items;
}

fn item_answers<R: Rng>(n_items: usize, victim: bool, rng: &mut R) -> Vec<bool> {
    let mut answers = vec![false; n_items];
    if victim {
        let first = rng.random_range(0..n_items);
        for (i, a) in answers.iter_mut().enumerate() {
            *a = i == first || rng.random_bool(0.25);
        }
    }
    answers
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FrameGenConfig {
        FrameGenConfig { n_neighborhoods: 12, households_per_tract: CountRange::new(20, 40), ..Default::default() }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_synthetic_frame(&small()).unwrap();
        let b = generate_synthetic_frame(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_frame(&FrameGenConfig { seed: 43, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_prevalence_gives_no_victims() {
        let cfg = FrameGenConfig { prevalence: OutcomeTargets::uniform(0.0), ..small() };
        let f = generate_synthetic_frame(&cfg).unwrap();
        assert!(f.women().all(|w| w.latent.iter().all(|x| !x)));
        assert!(f.women().all(|w| w.items.iter().flatten().all(|x| !x)));
    }

    #[test]
    fn enumerated_truth_is_mean_of_latent_flags() {
        let f = generate_synthetic_frame(&small()).unwrap();
        let truth = f.truth.as_ref().unwrap();
        for o in Outcome::grid() {
            let n = f.women().count() as f64;
            let k = f.women().filter(|w| w.is_victim(o)).count() as f64;
            assert_eq!(truth.get(o), k / n);
        }
    }

    #[test]
    fn items_agree_with_latent_status() {
        let f = generate_synthetic_frame(&small()).unwrap();
        for w in f.women() {
            for o in Outcome::grid() {
                assert_eq!(w.items[o.index()].iter().any(|x| *x), w.is_victim(o));
            }
            // 12-month victims are lifetime victims
            for v in ViolenceType::ALL {
                if w.is_victim(Outcome::new(v, Window::Last12Months)) {
                    assert!(w.is_victim(Outcome::new(v, Window::Lifetime)));
                }
            }
        }
    }

    #[test]
    fn large_frame_hits_target_prevalence() {
        let cfg = FrameGenConfig { n_neighborhoods: 60, ..Default::default() };
        let f = generate_synthetic_frame(&cfg).unwrap();
        let truth = f.truth.as_ref().unwrap();
        let n = truth.n_women as f64;
        let p = truth.get(Outcome::new(ViolenceType::Emotional, Window::Lifetime));
        let se = (0.3 * 0.7 / n).sqrt();
        assert!((p - 0.30).abs() < 4.0 * se, "p = {p}, n = {n}");
    }

    #[test]
    fn degenerate_config_rejected() {
        let bad =
            FrameGenConfig { eligible_women: EligibleWomenModel { p_zero: 1.0, ..Default::default() }, ..small() };
        assert!(matches!(generate_synthetic_frame(&bad), Err(FrameError::Config(_))));
        let bad = FrameGenConfig { n_neighborhoods: 3, ..small() };
        assert!(generate_synthetic_frame(&bad).is_err());
    }
}
