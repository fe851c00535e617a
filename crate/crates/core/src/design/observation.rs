//! Respondent records and their CSV layout.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DesignError, TractKey};
use crate::domain::{Covariates, Outcome, ViolenceType};

/// Item answers per outcome in [`Outcome::grid`] order. `None` marks a missing answer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemAnswers(pub [Vec<Option<bool>>; 6]);

impl ItemAnswers {
    /// All items missing, with the given item count per violence type.
    pub fn missing(items_per_type: [usize; 3]) -> Self {
        let mut out: [Vec<Option<bool>>; 6] = Default::default();
        for o in Outcome::grid() {
            out[o.index()] = vec![None; items_per_type[type_index(o.vtype)]];
        }
        Self(out)
    }

    pub fn get(&self, outcome: Outcome) -> &[Option<bool>] {
        &self.0[outcome.index()]
    }

    pub fn get_mut(&mut self, outcome: Outcome) -> &mut Vec<Option<bool>> {
        &mut self.0[outcome.index()]
    }
}

fn type_index(t: ViolenceType) -> usize {
    match t {
        ViolenceType::Emotional => 0,
        ViolenceType::Physical => 1,
        ViolenceType::Sexual => 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub city: String,
    pub stratum: String,
    pub neighborhood: String,
    pub tract: String,
    pub household: String,
    pub woman_id: String,
    pub n_eligible: u32,
    /// Whether she answered the violence section.
    pub answered_violence: bool,
    pub covariates: Covariates,
    pub items: ItemAnswers,
}

impl Observation {
    pub fn tract_key(&self) -> TractKey {
        TractKey::new(&self.city, &self.stratum, &self.neighborhood, &self.tract)
    }
}

const BASE_HEADER: [&str; 14] = [
    "city",
    "stratum",
    "neighborhood",
    "tract",
    "household",
    "woman_id",
    "n_eligible",
    "answered_violence",
    "cohab",
    "know_victim",
    "children",
    "age_group",
    "race",
    "education",
];

pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<Observation>, DesignError> {
    parse_observations(std::fs::File::open(path.as_ref())?)
}

fn flag(v: &str, line: u64, col: &str) -> Result<bool, DesignError> {
    match v {
        "1" | "true" | "TRUE" => Ok(true),
        "0" | "false" | "FALSE" => Ok(false),
        _ => Err(DesignError::Parse { line, message: format!("`{col}`: expected 0/1, got `{v}`") }),
    }
}

/// Parses observations. Item columns are named `{type}_{window}_{k}` with
/// `k` starting at 1; empty cells are missing answers.
pub fn parse_observations<R: Read>(reader: R) -> Result<Vec<Observation>, DesignError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = BASE_HEADER
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| DesignError::Parse { line: 1, message: format!("missing column `{c}`") })
        })
        .collect::<Result<_, _>>()?;

    // (column, outcome index, item index)
    let mut item_cols = Vec::new();
    let mut n_items = [0usize; 6];
    for (col, h) in headers.iter().enumerate() {
        for o in Outcome::grid() {
            let prefix = format!("{}_", o.column_prefix());
            if let Some(rest) = h.strip_prefix(&prefix) {
                if let Ok(k) = rest.parse::<usize>() {
                    if k == 0 {
                        return Err(DesignError::Parse {
                            line: 1,
                            message: format!("item column `{h}` must start at 1"),
                        });
                    }
                    item_cols.push((col, o.index(), k - 1));
                    n_items[o.index()] = n_items[o.index()].max(k);
                }
            }
        }
    }

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |k: usize| record.get(idx[k]).unwrap_or("");
        let need = |k: usize| -> Result<String, DesignError> {
            let v = get(k);
            if v.is_empty() {
                return Err(DesignError::Parse { line, message: format!("empty `{}`", BASE_HEADER[k]) });
            }
            Ok(v.to_string())
        };
        let parse_err =
            |k: usize, e: String| DesignError::Parse { line, message: format!("`{}`: {e}", BASE_HEADER[k]) };
        let n_eligible = get(6).parse::<u32>().map_err(|e| parse_err(6, e.to_string()))?;
        let covariates = Covariates {
            cohab: flag(get(8), line, "cohab")?,
            know_victim: flag(get(9), line, "know_victim")?,
            children: flag(get(10), line, "children")?,
            age_group: get(11).parse().map_err(|e| parse_err(11, e))?,
            race: get(12).parse().map_err(|e| parse_err(12, e))?,
            education: get(13).parse().map_err(|e| parse_err(13, e))?,
        };
        let mut items: [Vec<Option<bool>>; 6] = Default::default();
        for (k, n) in n_items.iter().enumerate() {
            items[k] = vec![None; *n];
        }
        for &(col, o, k) in &item_cols {
            let v = record.get(col).unwrap_or("");
            if !v.is_empty() {
                items[o][k] = Some(flag(v, line, &headers[col])?);
            }
        }
        out.push(Observation {
            city: need(0)?,
            stratum: need(1)?,
            neighborhood: need(2)?,
            tract: need(3)?,
            household: need(4)?,
            woman_id: need(5)?,
            n_eligible,
            answered_violence: flag(get(7), line, "answered_violence")?,
            covariates,
            items: ItemAnswers(items),
        });
    }
    Ok(out)
}

pub fn write_observations<W: Write>(observations: &[Observation], writer: W) -> Result<(), DesignError> {
    let mut n_items = [0usize; 6];
    for obs in observations {
        for (k, v) in obs.items.0.iter().enumerate() {
            n_items[k] = n_items[k].max(v.len());
        }
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = BASE_HEADER.iter().map(|s| s.to_string()).collect();
    for o in Outcome::grid() {
        for k in 1..=n_items[o.index()] {
            header.push(format!("{}_{k}", o.column_prefix()));
        }
    }
    wtr.write_record(&header)?;
    let b = |x: bool| if x { "1" } else { "0" }.to_string();
    for obs in observations {
        let c = &obs.covariates;
        let mut row = vec![
            obs.city.clone(),
            obs.stratum.clone(),
            obs.neighborhood.clone(),
            obs.tract.clone(),
            obs.household.clone(),
            obs.woman_id.clone(),
            obs.n_eligible.to_string(),
            b(obs.answered_violence),
            b(c.cohab),
            b(c.know_victim),
            b(c.children),
            c.age_group.as_str().to_string(),
            c.race.as_str().to_string(),
            c.education.as_str().to_string(),
        ];
        for o in Outcome::grid() {
            let vals = obs.items.get(o);
            for k in 0..n_items[o.index()] {
                row.push(vals.get(k).copied().flatten().map(b).unwrap_or_default());
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgeGroup, Education, Race, Window};

    fn sample() -> Observation {
        let mut items = ItemAnswers::missing([2, 3, 1]);
        items.get_mut(Outcome::new(ViolenceType::Physical, Window::Lifetime))[1] = Some(true);
        items.get_mut(Outcome::new(ViolenceType::Physical, Window::Lifetime))[0] = Some(false);
        Observation {
            city: "C1".into(),
            stratum: "1".into(),
            neighborhood: "N1".into(),
            tract: "T1".into(),
            household: "H1".into(),
            woman_id: "W1".into(),
            n_eligible: 2,
            answered_violence: true,
            covariates: Covariates {
                cohab: true,
                know_victim: false,
                children: true,
                age_group: AgeGroup::Young,
                race: Race::NonWhite,
                education: Education::HighSchool,
            },
            items,
        }
    }

    #[test]
    fn csv_round_trip() {
        let obs = vec![sample()];
        let mut buf = Vec::new();
        write_observations(&obs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().ends_with("sexual_12m_1"));
        let back = parse_observations(buf.as_slice()).unwrap();
        assert_eq!(back, obs);
    }

    #[test]
    fn bad_flag_reports_line() {
        let mut buf = Vec::new();
        write_observations(&[sample(), sample()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(",1,1,0,1,young", ",1,7,0,1,young", 2);
        let err = parse_observations(text.as_bytes()).unwrap_err();
        assert!(matches!(err, DesignError::Parse { line: 2, .. }), "{err}");
    }
}
