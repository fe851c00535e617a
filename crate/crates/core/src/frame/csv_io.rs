//! Denormalized frame CSV: one row per household.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{City, FrameError, Household, Neighborhood, SamplingFrame, Stratum, Tract};

pub const FRAME_HEADER: [&str; 8] = [
    "city",
    "stratum",
    "neighborhood",
    "tract",
    "household",
    "n_households_neighborhood",
    "n_households_tract",
    "n_eligible_women",
];

pub fn load_frame(path: impl AsRef<Path>) -> Result<SamplingFrame, FrameError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_frame(file)
}

/// Parses a frame CSV and checks all frame invariants.
pub fn read_frame<R: Read>(reader: R) -> Result<SamplingFrame, FrameError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize, FrameError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FrameError::Parse { line: 1, message: format!("missing column `{name}`") })
    };
    let idx: Vec<usize> = FRAME_HEADER.iter().map(|c| col(c)).collect::<Result<_, _>>()?;

    let mut frame = SamplingFrame { cities: Vec::new(), truth: None };
    let mut city_pos: HashMap<String, usize> = HashMap::new();
    let mut stratum_pos: HashMap<(usize, String), usize> = HashMap::new();
    let mut nb_pos: HashMap<(usize, usize, String), usize> = HashMap::new();
    let mut tract_pos: HashMap<(usize, usize, usize, String), usize> = HashMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<&str, FrameError> {
            let v = record.get(idx[k]).unwrap_or("");
            if v.is_empty() {
                return Err(FrameError::Parse { line, message: format!("empty `{}`", FRAME_HEADER[k]) });
            }
            Ok(v)
        };
        let count = |k: usize| -> Result<u64, FrameError> {
            field(k)?
                .parse::<u64>()
                .map_err(|e| FrameError::Parse { line, message: format!("`{}`: {e}", FRAME_HEADER[k]) })
        };
        let (city, stratum, nb, tract, hh) = (field(0)?, field(1)?, field(2)?, field(3)?, field(4)?);
        let (nh_nb, nh_tract) = (count(5)?, count(6)?);
        let n_eligible = u32::try_from(count(7)?)
            .map_err(|e| FrameError::Parse { line, message: format!("`n_eligible_women`: {e}") })?;

        let ci = *city_pos.entry(city.to_string()).or_insert_with(|| {
            frame.cities.push(City { id: city.to_string(), strata: Vec::new() });
            frame.cities.len() - 1
        });
        let c = &mut frame.cities[ci];
        let si = *stratum_pos.entry((ci, stratum.to_string())).or_insert_with(|| {
            c.strata.push(Stratum { id: stratum.to_string(), neighborhoods: Vec::new() });
            c.strata.len() - 1
        });
        let s = &mut c.strata[si];
        let ni = *nb_pos.entry((ci, si, nb.to_string())).or_insert_with(|| {
            s.neighborhoods.push(Neighborhood { id: nb.to_string(), n_households: nh_nb, tracts: Vec::new() });
            s.neighborhoods.len() - 1
        });
        let n = &mut s.neighborhoods[ni];
        if n.n_households != nh_nb {
            return Err(FrameError::Integrity {
                unit: format!("city {city} stratum {stratum} neighborhood {nb}"),
                message: format!("line {line}: household count {nh_nb} disagrees with earlier {}", n.n_households),
            });
        }
        let ti = *tract_pos.entry((ci, si, ni, tract.to_string())).or_insert_with(|| {
            n.tracts.push(Tract {
                id: tract.to_string(),
                n_households: nh_tract,
                households: Vec::new(),
                response_rate: 1.0,
            });
            n.tracts.len() - 1
        });
        let t = &mut n.tracts[ti];
        if t.n_households != nh_tract {
            return Err(FrameError::Integrity {
                unit: format!("city {city} stratum {stratum} neighborhood {nb} tract {tract}"),
                message: format!("line {line}: household count {nh_tract} disagrees with earlier {}", t.n_households),
            });
        }
        t.households.push(Household {
            id: hh.to_string(),
            n_eligible_women: n_eligible,
            head: None,
            women: Vec::new(),
        });
    }
    if frame.cities.is_empty() {
        return Err(FrameError::Parse { line: 1, message: "frame has no rows".into() });
    }
    frame.validate()?;
    Ok(frame)
}

pub fn write_frame_csv(frame: &SamplingFrame, path: impl AsRef<Path>) -> Result<(), FrameError> {
    let file = std::fs::File::create(path.as_ref())?;
    write_frame(frame, file)
}

pub fn write_frame<W: Write>(frame: &SamplingFrame, writer: W) -> Result<(), FrameError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(FRAME_HEADER)?;
    for c in &frame.cities {
        for s in &c.strata {
            for n in &s.neighborhoods {
                for t in &n.tracts {
                    for h in &t.households {
                        wtr.write_record([
                            c.id.as_str(),
                            s.id.as_str(),
                            n.id.as_str(),
                            t.id.as_str(),
                            h.id.as_str(),
                            &n.n_households.to_string(),
                            &t.n_households.to_string(),
                            &h.n_eligible_women.to_string(),
                        ])?;
                    }
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
