//! `weight`: base weights from the design, the five-step calibration
//! pipeline per city, and the violence-section nonresponse adjustment.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surveyforge::adjust::{
    covariate_labels, rake, scale_to_mean_one, section_nonresponse_weights, trim_weights, write_weights,
    PipelineOptions, RakingSpec, Stage, WeightVector, WEIGHTS_HEADER,
};
use surveyforge::design::{inclusion_probabilities, read_observations, read_stage_counts, Observation};
use surveyforge::frame::load_frame;
use surveyforge::glm::{render_logit_table, LogitFit, LogitOptions};
use surveyforge::stats::WeightSummary;

use crate::config::{self, check_quantile, Loaded};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub frame: PathBuf,
    pub observations: PathBuf,
    pub stage_counts: PathBuf,
    pub raking_spec: PathBuf,
    #[serde(default)]
    pub trimming: PipelineOptions,
    #[serde(default)]
    pub logit: LogitOptions,
    #[serde(default = "yes")]
    pub section_nonresponse: bool,
}

fn yes() -> bool {
    true
}

/// Raking controls per city id, with an optional fallback for cities not
/// listed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RakingSpecFile {
    #[serde(default)]
    pub default: Option<RakingSpec>,
    #[serde(default)]
    pub cities: BTreeMap<String, RakingSpec>,
}

impl RakingSpecFile {
    fn for_city(&self, city: &str) -> Result<&RakingSpec, CliError> {
        self.cities
            .get(city)
            .or(self.default.as_ref())
            .ok_or_else(|| CliError::Config(format!("raking spec has no controls for city `{city}` and no default")))
    }
}

/// Output file stems in pipeline order.
pub const STAGES: [&str; 7] = ["base", "trimmed", "raked", "scaled", "retrimmed", "final", "section_adjusted"];

pub const DIAGNOSTICS_HEADER: [&str; 9] = ["city", "stage", "N", "Mean", "Sd", "Min", "Max", "IQR", "CV"];

/// The pipeline with every intermediate kept. The last element equals
/// `final_design_weights_with` on the same input.
pub fn pipeline_stages(
    base: &WeightVector,
    spec: &RakingSpec,
    labels: &[Vec<String>],
    opts: &PipelineOptions,
) -> Result<[WeightVector; 6], CliError> {
    let trimmed = trim_weights(base, Some(opts.first_lower_q), Some(opts.first_upper_q), &opts.trim)?;
    let (raked, report) = rake(&trimmed, spec, labels)?;
    log::debug!("raking converged in {} iterations (max error {:e})", report.iterations, report.max_error);
    let scaled = scale_to_mean_one(&raked)?;
    let retrimmed = trim_weights(&scaled, None, Some(opts.second_upper_q), &opts.trim)?;
    let fin = scale_to_mean_one(&retrimmed)?;
    Ok([base.clone(), trimmed, raked, scaled, retrimmed, fin])
}

struct CityWeights {
    city: String,
    /// Woman ids and weights per entry of [`STAGES`].
    stages: Vec<(Vec<String>, WeightVector)>,
    fit: Option<LogitFit>,
}

fn weight_city(
    city: &str,
    obs: &[&Observation],
    base: Vec<f64>,
    spec: &RakingSpec,
    cfg: &WeightConfig,
) -> Result<CityWeights, CliError> {
    let ids: Vec<String> = obs.iter().map(|o| o.woman_id.clone()).collect();
    let covariates: Vec<_> = obs.iter().map(|o| o.covariates).collect();
    let labels = covariate_labels(spec, &covariates)?;
    let base = WeightVector::new(base, Stage::Base)?;
    let mut stages: Vec<(Vec<String>, WeightVector)> =
        pipeline_stages(&base, spec, &labels, &cfg.trimming)?.into_iter().map(|w| (ids.clone(), w)).collect();
    let mut fit = None;
    if cfg.section_nonresponse {
        let answered: Vec<bool> = obs.iter().map(|o| o.answered_violence).collect();
        let s = section_nonresponse_weights(&stages[5].1, &covariates, &answered, &cfg.logit)?;
        let kept = s.respondents.iter().map(|&i| ids[i].clone()).collect();
        stages.push((kept, s.weights));
        fit = s.fit;
    }
    Ok(CityWeights { city: city.to_string(), stages, fit })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn run(cfg_path: &Path, out: &Path) -> Result<(), CliError> {
    let loaded: Loaded<WeightConfig> = config::load(cfg_path)?;
    let cfg = &loaded.value;
    check_quantile("trimming.first_lower_q", cfg.trimming.first_lower_q)?;
    check_quantile("trimming.first_upper_q", cfg.trimming.first_upper_q)?;
    check_quantile("trimming.second_upper_q", cfg.trimming.second_upper_q)?;
    if cfg.trimming.first_lower_q >= cfg.trimming.first_upper_q {
        return Err(CliError::Config("trimming.first_lower_q must be below trimming.first_upper_q".into()));
    }
    let spec_path = loaded.input(&cfg.raking_spec, "raking spec")?;
    let specs: RakingSpecFile = config::read_json(&spec_path)?;
    let frame = load_frame(loaded.input(&cfg.frame, "frame")?)?;
    let observations = read_observations(loaded.input(&cfg.observations, "observations")?)?;
    let counts = read_stage_counts(loaded.input(&cfg.stage_counts, "stage counts")?)?;
    let out = config::output_dir(out)?;

    let (probs, diag) = inclusion_probabilities(&frame, &counts, &observations)?;
    log::info!("{} certainty units, {} sparse tracts", diag.certainty_units.len(), diag.sparse_tracts.len());
    let base: Vec<f64> = probs.iter().map(|p| p.base_weight()).collect::<Result<_, _>>()?;

    let mut results = Vec::new();
    for city in &frame.cities {
        let idx: Vec<usize> = (0..observations.len()).filter(|&i| observations[i].city == city.id).collect();
        if idx.is_empty() {
            log::warn!("city {} has no observations", city.id);
            continue;
        }
        let obs: Vec<&Observation> = idx.iter().map(|&i| &observations[i]).collect();
        let w = weight_city(&city.id, &obs, idx.iter().map(|&i| base[i]).collect(), specs.for_city(&city.id)?, cfg)
            .map_err(|e| CliError::Runtime(format!("city {}: {e}", city.id)))?;
        log::info!("weighted {} observations in {}", obs.len(), city.id);
        results.push(w);
    }
    if results.is_empty() {
        return Err(CliError::Runtime("no observation belongs to a frame city".into()));
    }
    write_outputs(&out, &results)
}

fn write_outputs(out: &Path, results: &[CityWeights]) -> Result<(), CliError> {
    let n_stages = results[0].stages.len();
    for (k, stem) in STAGES.iter().enumerate().take(n_stages) {
        let mut wtr = csv::Writer::from_writer(config::create(out, &format!("weights_{stem}.csv"))?);
        wtr.write_record(WEIGHTS_HEADER)?;
        for r in results {
            let (ids, w) = &r.stages[k];
            write_weights(&mut wtr, ids, w)?;
        }
        wtr.flush()?;
    }

    let mut wtr = csv::Writer::from_writer(config::create(out, "diagnostics.csv")?);
    wtr.write_record(DIAGNOSTICS_HEADER)?;
    let mut table = format!(
        "{:<16}{:<18}{:>7}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}\n",
        "City", "Stage", "N", "Mean", "Sd", "Min", "Max", "IQR", "CV"
    );
    for r in results {
        for (k, (_, w)) in r.stages.iter().enumerate() {
            let s = WeightSummary::of(w.values());
            wtr.write_record([
                r.city.clone(),
                STAGES[k].to_string(),
                s.n.to_string(),
                num(s.mean),
                num(s.sd),
                num(s.min),
                num(s.max),
                num(s.iqr),
                num(s.cv),
            ])?;
            table.push_str(&format!(
                "{:<16}{:<18}{:>7}{:>8.2}{:>8.2}{:>8.2}{:>8.2}{:>8.2}{:>8.2}\n",
                r.city, STAGES[k], s.n, s.mean, s.sd, s.min, s.max, s.iqr, s.cv
            ));
        }
    }
    wtr.flush()?;
    config::create(out, "diagnostics.txt")?.write_all(table.as_bytes())?;

    let fits: Vec<(String, &LogitFit)> =
        results.iter().filter_map(|r| r.fit.as_ref().map(|f| (r.city.clone(), f))).collect();
    if !fits.is_empty() {
        let text = render_logit_table("Response to the violence section", &fits);
        config::create(out, "nonresponse_models.txt")?.write_all(text.as_bytes())?;
    }
    Ok(())
}
