//! `prevalence`: per city and outcome, the original, unweighted and weighted
//! estimates side by side.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surveyforge::design::{read_observations, Observation};
use surveyforge::domain::Outcome;
use surveyforge::estimate::{
    prevalence, render_table, victim_indicator, write_report, CiMethod, DesignKind, EstimateOptions, PrevalenceRow,
    SurveyDesign,
};

use crate::config::{self, Loaded};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrevalenceConfig {
    pub observations: PathBuf,
    /// `woman_id,stage,weight` file written by `weight`.
    pub weights: PathBuf,
    #[serde(default = "default_year")]
    pub year: u32,
    #[serde(default)]
    pub ci: CiMethod,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Empty means all six outcomes.
    #[serde(default)]
    pub outcomes: Vec<Outcome>,
}

fn default_year() -> u32 {
    2016
}

fn default_level() -> f64 {
    0.95
}

pub fn read_weights(path: &Path) -> Result<HashMap<String, f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let (id, w) = (rec.get(0).unwrap_or(""), rec.get(2).unwrap_or(""));
        let w: f64 =
            w.parse().map_err(|e| CliError::Runtime(format!("{}:{line}: weight `{w}`: {e}", path.display())))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(CliError::Runtime(format!("{}:{line}: weight must be positive, got {w}", path.display())));
        }
        if out.insert(id.to_string(), w).is_some() {
            return Err(CliError::Runtime(format!("{}:{line}: duplicate woman_id `{id}`", path.display())));
        }
    }
    Ok(out)
}

/// The three report rows of one cell, skipping designs without a usable
/// estimate.
fn cell_rows(
    year: u32,
    city: &str,
    outcome: Outcome,
    obs: &[&Observation],
    weights: &HashMap<String, f64>,
    opts: &EstimateOptions,
) -> Vec<PrevalenceRow> {
    let mut rows = Vec::new();
    let y_all: Vec<Option<bool>> = obs.iter().map(|o| victim_indicator(o.items.get(outcome))).collect();
    let weighted: Vec<usize> = (0..obs.len()).filter(|&i| weights.contains_key(&obs[i].woman_id)).collect();
    let y_w: Vec<Option<bool>> = weighted.iter().map(|&i| y_all[i]).collect();
    let design = SurveyDesign::new(
        weighted.iter().map(|&i| obs[i].stratum.clone()).collect(),
        weighted.iter().map(|&i| obs[i].neighborhood.clone()).collect(),
        weighted.iter().map(|&i| weights[&obs[i].woman_id]).collect(),
    );
    let attempts = [
        (DesignKind::Original, SurveyDesign::simple(vec![1.0; obs.len()]), &y_all),
        (DesignKind::Unweighted, design.clone().map(|d| d.unweighted()), &y_w),
        (DesignKind::Weighted, design, &y_w),
    ];
    for (kind, design, y) in attempts {
        let est = design.and_then(|d| prevalence(&d, y, opts));
        match est {
            Ok(e) if e.n > 0 && e.prev.is_finite() => {
                rows.push(PrevalenceRow::from_estimate(year, city, outcome, kind, &e))
            }
            Ok(_) => log::warn!("{city} {outcome} {}: no answered items, row omitted", kind.as_str()),
            Err(e) => log::warn!("{city} {outcome} {}: {e}, row omitted", kind.as_str()),
        }
    }
    rows
}

pub fn run(cfg_path: &Path, out: &Path) -> Result<(), CliError> {
    let loaded: Loaded<PrevalenceConfig> = config::load(cfg_path)?;
    let cfg = &loaded.value;
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(CliError::Config(format!("level must lie strictly between 0 and 1, got {}", cfg.level)));
    }
    let obs_path = loaded.input(&cfg.observations, "observations")?;
    let weights_path = loaded.artifact(&cfg.weights, "weights from a `weight` run")?;
    let observations = read_observations(obs_path)?;
    let weights = read_weights(&weights_path)?;
    let unknown = weights.keys().filter(|id| !observations.iter().any(|o| &o.woman_id == *id)).count();
    if unknown > 0 {
        log::warn!("{unknown} weighted women are not in the observations file");
    }
    let out = config::output_dir(out)?;
    let opts = EstimateOptions { ci: cfg.ci, level: cfg.level };
    let outcomes = if cfg.outcomes.is_empty() { Outcome::grid().to_vec() } else { cfg.outcomes.clone() };

    let mut cities: Vec<&str> = Vec::new();
    for o in &observations {
        if !cities.contains(&o.city.as_str()) {
            cities.push(&o.city);
        }
    }
    let mut rows = Vec::new();
    for city in cities {
        let obs: Vec<&Observation> = observations.iter().filter(|o| o.city == city).collect();
        for &outcome in &outcomes {
            rows.extend(cell_rows(cfg.year, city, outcome, &obs, &weights, &opts));
        }
    }
    write_report(&rows, config::create(&out, "report.csv")?)?;
    let mut text = String::new();
    for &outcome in &outcomes {
        text.push_str(&render_table(&rows, cfg.year, outcome));
        text.push('\n');
    }
    config::create(&out, "tables.txt")?.write_all(text.as_bytes())?;
    Ok(())
}
