//! Replicate loop and its summaries.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_attrition_and_refresh, draw_wave1, pool_wave2, weight_sample, Assertions, ScenarioConfig, SimError};
use crate::design::{inclusion_probabilities, Observation};
use crate::domain::Outcome;
use crate::estimate::{prevalence, var_ratio, victim_indicator};
use crate::frame::{generate_synthetic_frame, SamplingFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub outcome: Outcome,
    pub truth: f64,
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `None` when the interval is undefined.
    pub covered: Option<bool>,
    pub unweighted_estimate: f64,
    pub unweighted_se: f64,
    pub var_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub outcome: Outcome,
    pub replicates: usize,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rel_bias: f64,
    /// Standard deviation of the estimates across replicates.
    pub empirical_se: f64,
    pub mean_se: f64,
    pub coverage: Option<f64>,
    pub unweighted_bias: f64,
    pub mean_var_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub scenario: String,
    pub replicates: usize,
    pub outcomes: Vec<OutcomeSummary>,
    /// Median over outcomes of the mean per-replicate variance ratio.
    pub median_var_ratio: Option<f64>,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub records: Vec<ReplicateRecord>,
    pub summary: MonteCarloSummary,
}

/// One draw, weighting and estimation pass. Deterministic in `(seed, rep)`.
pub fn run_replicate(
    frame: &SamplingFrame,
    cfg: &ScenarioConfig,
    rep: usize,
) -> Result<Vec<ReplicateRecord>, SimError> {
    let truth = frame
        .truth
        .as_ref()
        .ok_or_else(|| SimError::Config("Monte Carlo runs need a synthetic frame with known prevalences".into()))?;
    let r = rep as u64;
    let wave1 = draw_wave1(frame, &cfg.sample, cfg.seed, r)?;
    let (observations, base): (Vec<Observation>, Vec<f64>) = match &cfg.attrition {
        None => {
            let (probs, _) = inclusion_probabilities(frame, &wave1.counts, &wave1.observations)?;
            let base = probs.iter().map(|p| p.base_weight()).collect::<Result<_, _>>()?;
            (wave1.observations, base)
        }
        Some(att) => {
            let wave2 = apply_attrition_and_refresh(frame, &wave1, &cfg.sample, att, cfg.seed, r)?;
            let pooled = pool_wave2(frame, &wave2)?;
            (wave2.members().map(|m| m.observation.clone()).collect(), pooled.iter().map(|m| m.pooled_weight).collect())
        }
    };
    let ws = weight_sample(&frame.cities, &observations, &base, &cfg.weighting)?;
    let unweighted = ws.design.unweighted();

    cfg.outcome_list()
        .into_iter()
        .map(|outcome| {
            let y: Vec<Option<bool>> =
                ws.members.iter().map(|&i| victim_indicator(observations[i].items.get(outcome))).collect();
            let w = prevalence(&ws.design, &y, &cfg.estimate)?;
            let u = prevalence(&unweighted, &y, &cfg.estimate)?;
            let t = truth.get(outcome);
            let covered = (w.ci_low.is_finite() && w.ci_high.is_finite()).then_some(w.ci_low <= t && t <= w.ci_high);
            Ok(ReplicateRecord {
                replicate: rep,
                outcome,
                truth: t,
                n: w.n,
                estimate: w.prev,
                se: w.se,
                ci_low: w.ci_low,
                ci_high: w.ci_high,
                covered,
                unweighted_estimate: u.prev,
                unweighted_se: u.se,
                var_ratio: var_ratio(w.var(), u.var()),
            })
        })
        .collect()
}

/// Generates the frame and runs every replicate in parallel. Records come
/// back in replicate order whatever the thread schedule.
pub fn run_monte_carlo(cfg: &ScenarioConfig) -> Result<MonteCarloResult, SimError> {
    cfg.validate()?;
    let start = Instant::now();
    let frame = generate_synthetic_frame(&cfg.frame)?;
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            run_replicate(&frame, cfg, rep).map_err(|e| SimError::Replicate { replicate: rep, source: Box::new(e) })
        })
        .collect::<Result<_, _>>()?;
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let summary = summarize(&cfg.name, cfg.replicates, &cfg.outcome_list(), &records, start.elapsed().as_secs_f64());
    Ok(MonteCarloResult { records, summary })
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[m] } else { (xs[m - 1] + xs[m]) / 2.0 })
}

pub(crate) fn summarize(
    scenario: &str,
    replicates: usize,
    outcomes: &[Outcome],
    records: &[ReplicateRecord],
    runtime_secs: f64,
) -> MonteCarloSummary {
    let outcomes: Vec<OutcomeSummary> = outcomes
        .iter()
        .map(|&outcome| {
            let rs: Vec<&ReplicateRecord> = records.iter().filter(|r| r.outcome == outcome).collect();
            let truth = rs.first().map_or(f64::NAN, |r| r.truth);
            let mean_estimate = mean(rs.iter().map(|r| r.estimate)).unwrap_or(f64::NAN);
            let empirical_se = if rs.len() > 1 {
                (rs.iter().map(|r| (r.estimate - mean_estimate).powi(2)).sum::<f64>() / (rs.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            let bias = mean_estimate - truth;
            OutcomeSummary {
                outcome,
                replicates: rs.len(),
                truth,
                mean_estimate,
                bias,
                rel_bias: bias / truth,
                empirical_se,
                mean_se: mean(rs.iter().map(|r| r.se)).unwrap_or(f64::NAN),
                coverage: mean(rs.iter().filter_map(|r| r.covered).map(|c| f64::from(u8::from(c)))),
                unweighted_bias: mean(rs.iter().map(|r| r.unweighted_estimate)).unwrap_or(f64::NAN) - truth,
                mean_var_ratio: mean(rs.iter().filter_map(|r| r.var_ratio)),
            }
        })
        .collect();
    let median_var_ratio = median(outcomes.iter().filter_map(|o| o.mean_var_ratio).collect());
    MonteCarloSummary { scenario: scenario.to_string(), replicates, outcomes, median_var_ratio, runtime_secs }
}

impl MonteCarloSummary {
    pub fn check(&self, a: &Assertions) -> Vec<AssertionOutcome> {
        let mut out = Vec::new();
        if let Some(max) = a.max_abs_rel_bias {
            for o in &self.outcomes {
                out.push(AssertionOutcome {
                    name: format!("relative bias {}", o.outcome),
                    passed: o.rel_bias.abs() < max,
                    detail: format!("|{:.5}| < {max}", o.rel_bias),
                });
            }
        }
        if let Some([lo, hi]) = a.coverage {
            for o in &self.outcomes {
                let c = o.coverage.unwrap_or(f64::NAN);
                out.push(AssertionOutcome {
                    name: format!("coverage {}", o.outcome),
                    passed: c >= lo && c <= hi,
                    detail: format!("{c:.4} in [{lo}, {hi}]"),
                });
            }
        }
        if let Some([lo, hi]) = a.median_var_ratio {
            let m = self.median_var_ratio.unwrap_or(f64::NAN);
            out.push(AssertionOutcome {
                name: "median variance ratio".into(),
                passed: m >= lo && m <= hi,
                detail: format!("{m:.4} in [{lo}, {hi}]"),
            });
        }
        out
    }
}

pub const REPLICATE_HEADER: [&str; 13] = [
    "replicate",
    "type",
    "window",
    "truth",
    "n",
    "estimate",
    "se",
    "ci_low",
    "ci_high",
    "covered",
    "unweighted_estimate",
    "unweighted_se",
    "var_ratio",
];

pub const SUMMARY_HEADER: [&str; 12] = [
    "type",
    "window",
    "replicates",
    "truth",
    "mean_estimate",
    "bias",
    "rel_bias",
    "empirical_se",
    "mean_se",
    "coverage",
    "unweighted_bias",
    "mean_var_ratio",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_replicates<W: Write>(records: &[ReplicateRecord], writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(REPLICATE_HEADER)?;
    for r in records {
        wtr.write_record([
            r.replicate.to_string(),
            r.outcome.vtype.as_str().into(),
            r.outcome.window.as_str().into(),
            num(r.truth),
            r.n.to_string(),
            num(r.estimate),
            num(r.se),
            num(r.ci_low),
            num(r.ci_high),
            r.covered.map(|c| u8::from(c).to_string()).unwrap_or_default(),
            num(r.unweighted_estimate),
            num(r.unweighted_se),
            opt(r.var_ratio),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(summary: &MonteCarloSummary, writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SUMMARY_HEADER)?;
    for o in &summary.outcomes {
        wtr.write_record([
            o.outcome.vtype.as_str().into(),
            o.outcome.window.as_str().into(),
            o.replicates.to_string(),
            num(o.truth),
            num(o.mean_estimate),
            num(o.bias),
            num(o.rel_bias),
            num(o.empirical_se),
            num(o.mean_se),
            opt(o.coverage),
            num(o.unweighted_bias),
            opt(o.mean_var_ratio),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
