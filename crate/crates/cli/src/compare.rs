//! `compare`: Diff and VarRatio per cell, plus one data file per figure panel.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surveyforge::estimate::{compare, figure_panels, read_report, write_comparison, DesignKind};

use crate::config::{self, Loaded};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Report files written by `prevalence`, read in order.
    pub reports: Vec<PathBuf>,
}

pub fn run(cfg_path: &Path, out: &Path) -> Result<(), CliError> {
    let loaded: Loaded<CompareConfig> = config::load(cfg_path)?;
    if loaded.value.reports.is_empty() {
        return Err(CliError::Config("`reports` lists no files".into()));
    }
    let mut rows = Vec::new();
    for p in &loaded.value.reports {
        let path = loaded.artifact(p, "report from a `prevalence` run")?;
        let file = std::fs::File::open(&path)?;
        rows.extend(read_report(file).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?);
    }
    for (kind, what) in [(DesignKind::Weighted, "weighted"), (DesignKind::Unweighted, "unweighted")] {
        if !rows.iter().any(|r| r.design == kind) {
            return Err(CliError::MissingArtifact {
                path: loaded.resolve(&loaded.value.reports[0]),
                what: format!("{what} estimates"),
            });
        }
    }
    let comparison = compare(&rows);
    let out = config::output_dir(out)?;
    write_comparison(&comparison, config::create(&out, "comparison.csv")?)?;
    for (panel, panel_rows) in figure_panels(&comparison) {
        write_comparison(&panel_rows, config::create(&out, &format!("panel_{panel}.csv"))?)?;
    }
    Ok(())
}
