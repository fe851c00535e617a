//! `simulate`: Monte Carlo scenarios with pass/fail assertions.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use surveyforge::sim::{run_monte_carlo, write_replicates, write_summary, ScenarioConfig};

use crate::config::{self, Loaded};
use crate::error::CliError;

/// Either `{"scenarios": [...]}` or a single scenario object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimulateConfig {
    Many { scenarios: Vec<ScenarioConfig> },
    One(Box<ScenarioConfig>),
}

impl SimulateConfig {
    pub fn into_scenarios(self) -> Vec<ScenarioConfig> {
        match self {
            SimulateConfig::Many { scenarios } => scenarios,
            SimulateConfig::One(s) => vec![*s],
        }
    }
}

pub const ASSERTIONS_HEADER: [&str; 4] = ["scenario", "assertion", "passed", "detail"];

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn run(cfg_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let loaded: Loaded<SimulateConfig> = config::load(cfg_path)?;
    let mut scenarios = loaded.value.into_scenarios();
    if scenarios.is_empty() {
        return Err(CliError::Config("no scenarios".into()));
    }
    let mut names = HashSet::new();
    for s in &mut scenarios {
        if !valid_name(&s.name) {
            return Err(CliError::Config(format!("scenario name `{}` must be letters, digits, `_` or `-`", s.name)));
        }
        if !names.insert(s.name.clone()) {
            return Err(CliError::Config(format!("duplicate scenario name `{}`", s.name)));
        }
        if let Some(seed) = seed {
            s.seed = seed;
        }
        s.validate()?;
    }
    let out = config::output_dir(out)?;

    let mut assertions = csv::Writer::from_writer(config::create(&out, "assertions.csv")?);
    assertions.write_record(ASSERTIONS_HEADER)?;
    let mut failed = 0;
    for s in &scenarios {
        log::info!("scenario {}: {} replicates", s.name, s.replicates);
        let res = run_monte_carlo(s)?;
        write_replicates(&res.records, config::create(&out, &format!("{}_replicates.csv", s.name))?)?;
        write_summary(&res.summary, config::create(&out, &format!("{}_summary.csv", s.name))?)?;
        for a in res.summary.check(&s.assertions) {
            if a.passed {
                log::info!("{}: {} passed ({})", s.name, a.name, a.detail);
            } else {
                failed += 1;
                log::error!("{}: {} failed ({})", s.name, a.name, a.detail);
            }
            assertions.write_record([s.name.as_str(), &a.name, if a.passed { "true" } else { "false" }, &a.detail])?;
        }
    }
    assertions.flush()?;
    if failed > 0 {
        return Err(CliError::AssertionsFailed { failed });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_list_forms() {
        let one: SimulateConfig = serde_json::from_str(r#"{"name": "a", "replicates": 2}"#).unwrap();
        assert_eq!(one.into_scenarios().len(), 1);
        let many: SimulateConfig = serde_json::from_str(r#"{"scenarios": [{"name": "a"}, {"name": "b"}]}"#).unwrap();
        assert_eq!(many.into_scenarios().len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<SimulateConfig>(r#"{"name": "a", "replicate": 2}"#).is_err());
    }

    #[test]
    fn names_are_file_safe() {
        assert!(valid_name("reference_1"));
        assert!(!valid_name("../x"));
        assert!(!valid_name(""));
    }
}
