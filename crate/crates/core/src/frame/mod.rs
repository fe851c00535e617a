//! Population frame: city → stratum → neighborhood (PSU) → census tract (SSU)
//! → household (TSU) → eligible woman (QSU).

mod csv_io;
mod strata;
mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Covariates, Education, Outcome};

pub use csv_io::{load_frame, read_frame, write_frame, write_frame_csv};
pub use strata::{build_strata, N_STRATA};
pub use synth::{
    generate_synthetic_frame, CountRange, CovariateModel, EffectSizes, EligibleWomenModel, FrameGenConfig,
    OutcomeTargets, ResponseModel, TargetPair,
};

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("integrity error in {unit}: {message}")]
    Integrity { unit: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn integrity(unit: impl Into<String>, message: impl Into<String>) -> FrameError {
    FrameError::Integrity { unit: unit.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingFrame {
    pub cities: Vec<City>,
    /// Finite-population prevalences, present for synthetic frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruePrevalence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub id: String,
    pub strata: Vec<Stratum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub id: String,
    pub neighborhoods: Vec<Neighborhood>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub id: String,
    pub n_households: u64,
    pub tracts: Vec<Tract>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tract {
    pub id: String,
    pub n_households: u64,
    pub households: Vec<Household>,
    /// Probability that a visited household with an eligible woman yields a
    /// valid questionnaire. Only meaningful for synthetic frames.
    #[serde(default = "one")]
    pub response_rate: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadOfHousehold {
    pub age: u32,
    pub education: Education,
    pub female: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub id: String,
    pub n_eligible_women: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadOfHousehold>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub women: Vec<Woman>,
}

/// A resident eligible woman with latent survey outcomes (synthetic frames only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Woman {
    pub id: String,
    pub covariates: Covariates,
    /// Latent victim status per outcome, indexed by [`Outcome::index`].
    pub latent: [bool; 6],
    /// Item answers per outcome; at least one item is set iff the latent flag is.
    pub items: Vec<Vec<bool>>,
    /// Probability of answering the violence section once interviewed.
    pub answer_propensity: f64,
}

impl Woman {
    pub fn is_victim(&self, outcome: Outcome) -> bool {
        self.latent[outcome.index()]
    }
}

/// Enumerated population prevalences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruePrevalence {
    pub overall: [f64; 6],
    pub by_city: Vec<[f64; 6]>,
    pub n_women: u64,
}

impl TruePrevalence {
    pub fn get(&self, outcome: Outcome) -> f64 {
        self.overall[outcome.index()]
    }
}

impl Stratum {
    pub fn n_households(&self) -> u64 {
        self.neighborhoods.iter().map(|n| n.n_households).sum()
    }
}

impl City {
    pub fn n_households(&self) -> u64 {
        self.strata.iter().map(Stratum::n_households).sum()
    }

    pub fn women(&self) -> impl Iterator<Item = &Woman> {
        self.strata
            .iter()
            .flat_map(|s| &s.neighborhoods)
            .flat_map(|n| &n.tracts)
            .flat_map(|t| &t.households)
            .flat_map(|h| &h.women)
    }
}

impl SamplingFrame {
    pub fn city(&self, id: &str) -> Option<&City> {
        self.cities.iter().find(|c| c.id == id)
    }

    pub fn women(&self) -> impl Iterator<Item = &Woman> {
        self.cities.iter().flat_map(City::women)
    }

    pub fn is_synthetic(&self) -> bool {
        self.truth.is_some()
    }

    /// Frame with only the structural fields that the CSV schema carries.
    pub fn structure(&self) -> SamplingFrame {
        let mut out = self.clone();
        out.truth = None;
        for t in out
            .cities
            .iter_mut()
            .flat_map(|c| c.strata.iter_mut())
            .flat_map(|s| s.neighborhoods.iter_mut())
            .flat_map(|n| n.tracts.iter_mut())
        {
            t.response_rate = 1.0;
            for h in &mut t.households {
                h.head = None;
                h.women.clear();
            }
        }
        out
    }

    /// Prevalences by full enumeration of the women in the frame.
    pub fn enumerate_prevalence(&self) -> TruePrevalence {
        let mut total = [0u64; 6];
        let mut n = 0u64;
        let mut by_city = Vec::with_capacity(self.cities.len());
        for city in &self.cities {
            let mut counts = [0u64; 6];
            let mut nc = 0u64;
            for w in city.women() {
                nc += 1;
                for (k, flag) in w.latent.iter().enumerate() {
                    counts[k] += u64::from(*flag);
                }
            }
            n += nc;
            for k in 0..6 {
                total[k] += counts[k];
            }
            by_city.push(counts.map(|c| if nc == 0 { 0.0 } else { c as f64 / nc as f64 }));
        }
        TruePrevalence { overall: total.map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 }), by_city, n_women: n }
    }

    /// Checks every structural invariant of the frame.
    pub fn validate(&self) -> Result<(), FrameError> {
        unique(self.cities.iter().map(|c| c.id.as_str()), "frame")?;
        for city in &self.cities {
            unique(city.strata.iter().map(|s| s.id.as_str()), &format!("city {}", city.id))?;
            for stratum in &city.strata {
                let scope = format!("city {} stratum {}", city.id, stratum.id);
                if stratum.neighborhoods.is_empty() {
                    return Err(integrity(scope, "stratum has no neighborhoods"));
                }
                unique(stratum.neighborhoods.iter().map(|n| n.id.as_str()), &scope)?;
                for nb in &stratum.neighborhoods {
                    let scope = format!("{scope} neighborhood {}", nb.id);
                    let tract_sum: u64 = nb.tracts.iter().map(|t| t.n_households).sum();
                    if tract_sum != nb.n_households {
                        return Err(integrity(
                            scope,
                            format!("declared {} households but tracts sum to {tract_sum}", nb.n_households),
                        ));
                    }
                    unique(nb.tracts.iter().map(|t| t.id.as_str()), &scope)?;
                    for tract in &nb.tracts {
                        let scope = format!("{scope} tract {}", tract.id);
                        if !(0.0..=1.0).contains(&tract.response_rate) {
                            return Err(integrity(scope, "response rate outside [0, 1]"));
                        }
                        if !tract.households.is_empty() && tract.households.len() as u64 != tract.n_households {
                            return Err(integrity(
                                scope,
                                format!(
                                    "declared {} households but {} are listed",
                                    tract.n_households,
                                    tract.households.len()
                                ),
                            ));
                        }
                        unique(tract.households.iter().map(|h| h.id.as_str()), &scope)?;
                        for hh in &tract.households {
                            let listed = hh.women.len() as u32;
                            if (self.is_synthetic() || listed > 0) && listed != hh.n_eligible_women {
                                return Err(integrity(
                                    format!("{scope} household {}", hh.id),
                                    format!("{} eligible women declared, {listed} listed", hh.n_eligible_women),
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn unique<'a>(ids: impl Iterator<Item = &'a str>, scope: &str) -> Result<(), FrameError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(integrity(scope, format!("duplicate id `{id}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SamplingFrame {
        let hh = |id: &str| Household { id: id.into(), n_eligible_women: 1, head: None, women: vec![] };
        SamplingFrame {
            cities: vec![City {
                id: "C1".into(),
                strata: vec![Stratum {
                    id: "1".into(),
                    neighborhoods: vec![Neighborhood {
                        id: "N1".into(),
                        n_households: 2,
                        tracts: vec![Tract {
                            id: "T1".into(),
                            n_households: 2,
                            households: vec![hh("H1"), hh("H2")],
                            response_rate: 1.0,
                        }],
                    }],
                }],
            }],
            truth: None,
        }
    }

    #[test]
    fn consistent_frame_validates() {
        let f = tiny();
        f.validate().unwrap();
        assert_eq!(f.cities[0].strata[0].n_households(), 2);
    }

    #[test]
    fn neighborhood_total_mismatch_is_reported() {
        let mut f = tiny();
        f.cities[0].strata[0].neighborhoods[0].n_households = 5;
        let err = f.validate().unwrap_err();
        assert!(matches!(err, FrameError::Integrity { ref unit, .. } if unit.contains("neighborhood N1")));
    }

    #[test]
    fn duplicate_household_ids_rejected() {
        let mut f = tiny();
        f.cities[0].strata[0].neighborhoods[0].tracts[0].households[1].id = "H1".into();
        assert!(matches!(f.validate(), Err(FrameError::Integrity { .. })));
    }
}
