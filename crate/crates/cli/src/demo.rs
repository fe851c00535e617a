//! A self-contained input set for trying the subcommands: a synthetic frame,
//! one drawn sample, its stage counts, population raking controls and the
//! four configs.

use std::fs;
use std::path::Path;

use serde_json::json;
use surveyforge::design::{write_observations, write_stage_counts};
use surveyforge::frame::{generate_synthetic_frame, write_frame_csv, CountRange, FrameGenConfig};
use surveyforge::sim::{draw_wave1, population_raking_spec, SampleDesign};

use crate::error::CliError;
use crate::weight::RakingSpecFile;

pub fn demo_frame_config(seed: u64) -> FrameGenConfig {
    FrameGenConfig {
        seed,
        n_cities: 2,
        n_neighborhoods: 40,
        tracts_per_neighborhood: CountRange::new(3, 6),
        households_per_tract: CountRange::new(30, 90),
        ..Default::default()
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes `frame.csv`, `observations.csv`, `stage_counts.csv`,
/// `raking.json` and `weight.json`, `prevalence.json`, `compare.json`,
/// `simulate.json` into `dir`. The configs chain through `out/`.
pub fn write_demo(dir: &Path, seed: u64) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let frame = generate_synthetic_frame(&demo_frame_config(seed))?;
    let design = SampleDesign {
        psus_per_stratum: 4,
        tracts_per_psu: 3,
        visits_per_tract: CountRange::new(8, 12),
        household_response: None,
    };
    let sample = draw_wave1(&frame, &design, seed, 0)?;

    write_frame_csv(&frame, dir.join("frame.csv"))?;
    write_observations(&sample.observations, fs::File::create(dir.join("observations.csv"))?)?;
    write_stage_counts(&sample.counts, fs::File::create(dir.join("stage_counts.csv"))?)?;
    let specs = RakingSpecFile {
        default: None,
        cities: frame.cities.iter().map(|c| (c.id.clone(), population_raking_spec(c))).collect(),
    };
    write_json(&dir.join("raking.json"), &serde_json::to_value(&specs).map_err(CliError::runtime)?)?;

    write_json(
        &dir.join("weight.json"),
        &json!({
            "frame": "frame.csv",
            "observations": "observations.csv",
            "stage_counts": "stage_counts.csv",
            "raking_spec": "raking.json",
            "trimming": {"first_lower_q": 0.05, "first_upper_q": 0.95, "second_upper_q": 0.95},
            "section_nonresponse": true
        }),
    )?;
    write_json(
        &dir.join("prevalence.json"),
        &json!({
            "observations": "observations.csv",
            "weights": "out/weights_section_adjusted.csv",
            "year": 2016,
            "ci": "logit",
            "level": 0.95
        }),
    )?;
    write_json(&dir.join("compare.json"), &json!({"reports": ["out/report.csv"]}))?;
    write_json(
        &dir.join("simulate.json"),
        &json!({
            "scenarios": [{
                "name": "demo",
                "seed": seed,
                "replicates": 200,
                "frame": {
                    "seed": seed + 1,
                    "n_neighborhoods": 80,
                    "households_per_tract": {"min": 40, "max": 120},
                    "eligible_women": {"p_zero": 0.0, "mean_extra": 0.4, "max": 6},
                    "household_response": [1.0, 1.0]
                },
                "sample": {"psus_per_stratum": 5, "tracts_per_psu": 3, "visits_per_tract": {"min": 8, "max": 8}},
                "outcomes": [{"vtype": "emotional", "window": "lifetime"}, {"vtype": "physical", "window": "lifetime"}],
                "assertions": {"max_abs_rel_bias": 0.05, "coverage": [0.85, 0.99]}
            }]
        }),
    )?;
    Ok(())
}
