//! Field counts recorded per sampled tract.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DesignError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TractKey {
    pub city: String,
    pub stratum: String,
    pub neighborhood: String,
    pub tract: String,
}

impl TractKey {
    pub fn new(city: &str, stratum: &str, neighborhood: &str, tract: &str) -> Self {
        Self { city: city.into(), stratum: stratum.into(), neighborhood: neighborhood.into(), tract: tract.into() }
    }
}

impl fmt::Display for TractKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.city, self.stratum, self.neighborhood, self.tract)
    }
}

/// Counts for one sampled tract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    /// Neighborhoods sampled in the tract's stratum.
    pub n_psu_sampled: u32,
    /// Tracts sampled in the tract's neighborhood.
    pub n_ssu_sampled: u32,
    pub nv_households: u64,
    pub nv_questionnaires: u64,
}

pub type StageCountsTable = BTreeMap<TractKey, StageCounts>;

const HEADER: [&str; 8] = [
    "city",
    "stratum",
    "neighborhood",
    "tract",
    "n_psu_sampled",
    "n_ssu_sampled",
    "nv_households",
    "nv_questionnaires",
];

pub fn read_stage_counts(path: impl AsRef<Path>) -> Result<StageCountsTable, DesignError> {
    parse_stage_counts(std::fs::File::open(path.as_ref())?)
}

pub fn parse_stage_counts<R: Read>(reader: R) -> Result<StageCountsTable, DesignError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = HEADER
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| DesignError::Parse { line: 1, message: format!("missing column `{c}`") })
        })
        .collect::<Result<_, _>>()?;
    let mut table = StageCountsTable::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |k: usize| record.get(idx[k]).unwrap_or("");
        let num = |k: usize| -> Result<u64, DesignError> {
            get(k).parse::<u64>().map_err(|e| DesignError::Parse { line, message: format!("`{}`: {e}", HEADER[k]) })
        };
        let small = |k: usize| -> Result<u32, DesignError> {
            u32::try_from(num(k)?).map_err(|e| DesignError::Parse { line, message: format!("`{}`: {e}", HEADER[k]) })
        };
        let key = TractKey::new(get(0), get(1), get(2), get(3));
        let counts = StageCounts {
            n_psu_sampled: small(4)?,
            n_ssu_sampled: small(5)?,
            nv_households: num(6)?,
            nv_questionnaires: num(7)?,
        };
        if table.insert(key.clone(), counts).is_some() {
            return Err(DesignError::Parse { line, message: format!("duplicate tract {key}") });
        }
    }
    Ok(table)
}

pub fn write_stage_counts<W: Write>(table: &StageCountsTable, writer: W) -> Result<(), DesignError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HEADER)?;
    for (k, c) in table {
        wtr.write_record([
            k.city.clone(),
            k.stratum.clone(),
            k.neighborhood.clone(),
            k.tract.clone(),
            c.n_psu_sampled.to_string(),
            c.n_ssu_sampled.to_string(),
            c.nv_households.to_string(),
            c.nv_questionnaires.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
