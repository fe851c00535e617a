//! Two independent Poisson samples from one population, combined with pooled
//! weights. Used to check the pooling estimator against known truth.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::pool::{
    fit_counterfactual, pooled_weights, CovariateTable, MemberProbabilities, PooledSampleMember, Source,
};
use crate::rng::{purpose, substream};
use crate::stats::expit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualFrameUnit {
    pub id: String,
    pub x: Vec<f64>,
    pub y: f64,
    /// Inclusion probability in sample A (the refreshment role).
    pub pi_a: f64,
    /// Inclusion probability in sample B (the panel role).
    pub pi_b: f64,
}

/// Six units whose joint inclusion probability `pi_a * pi_b` is 0.2 for all.
pub fn dual_frame_micro_units() -> Vec<DualFrameUnit> {
    let pi_a = [0.5, 0.4, 0.25, 0.8, 0.625, 0.32];
    let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    pi_a.iter()
        .zip(y)
        .enumerate()
        .map(|(i, (&a, y))| DualFrameUnit { id: format!("U{}", i + 1), x: vec![i as f64], y, pi_a: a, pi_b: 0.2 / a })
        .collect()
}

fn members(units: &[&DualFrameUnit], own: impl Fn(&DualFrameUnit) -> f64, other: &[f64]) -> Vec<MemberProbabilities> {
    units
        .iter()
        .zip(other)
        .map(|(u, &p)| MemberProbabilities { id: u.id.clone(), p_own: own(u), p_hat_other: p })
        .collect()
}

/// Pooled estimate of the population mean with known size `n_pop`. A unit in
/// both samples is counted once, through its A record.
fn pooled_mean(units: &[DualFrameUnit], pooled: &[PooledSampleMember], n_pop: f64) -> f64 {
    let mut seen = std::collections::HashSet::new();
    let mut total = 0.0;
    for m in pooled {
        if seen.insert(m.id.as_str()) {
            let u = units.iter().find(|u| u.id == m.id).expect("member of the population");
            total += u.y * m.pooled_weight;
        }
    }
    total / n_pop
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualFrameExact {
    pub n_outcomes: usize,
    pub total_probability: f64,
    pub truth: f64,
    pub expectation: f64,
    pub variance: f64,
}

/// Enumerates all `4^N` joint outcomes of two independent Poisson samples,
/// using the true other-sample probabilities and a fixed overlap probability.
pub fn enumerate_dual_frame(units: &[DualFrameUnit], overlap: f64) -> Result<DualFrameExact, SimError> {
    if units.len() > 10 {
        return Err(SimError::SampleSpaceTooLarge { outcomes: 4f64.powi(units.len() as i32), limit: 1 << 20 });
    }
    let n = units.len();
    let n_pop = n as f64;
    let truth = units.iter().map(|u| u.y).sum::<f64>() / n_pop;
    let (mut total_p, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let n_outcomes = 1usize << (2 * n);
    for code in 0..n_outcomes {
        let in_a = |i: usize| code >> (2 * i) & 1 == 1;
        let in_b = |i: usize| code >> (2 * i + 1) & 1 == 1;
        let p: f64 = (0..n)
            .map(|i| {
                let u = &units[i];
                (if in_a(i) { u.pi_a } else { 1.0 - u.pi_a }) * (if in_b(i) { u.pi_b } else { 1.0 - u.pi_b })
            })
            .product();
        let a: Vec<&DualFrameUnit> = (0..n).filter(|&i| in_a(i)).map(|i| &units[i]).collect();
        let b: Vec<&DualFrameUnit> = (0..n).filter(|&i| in_b(i)).map(|i| &units[i]).collect();
        let re = members(&a, |u| u.pi_a, &a.iter().map(|u| u.pi_b).collect::<Vec<_>>());
        let nat = members(&b, |u| u.pi_b, &b.iter().map(|u| u.pi_a).collect::<Vec<_>>());
        let est = pooled_mean(units, &pooled_weights(&re, &nat, overlap)?, n_pop);
        total_p += p;
        m1 += p * est;
        m2 += p * est * est;
    }
    Ok(DualFrameExact { n_outcomes, total_probability: total_p, truth, expectation: m1, variance: m2 - m1 * m1 })
}

/// Population and sampling model for the Monte Carlo check. Both inclusion
/// probabilities and the outcome are logit-linear in two covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualFrameConfig {
    pub seed: u64,
    pub population: usize,
    pub replicates: usize,
    /// Intercept and slopes on `(x1, x2)`; `x1` is standard normal and `x2`
    /// Bernoulli(0.5).
    pub sample_a: [f64; 3],
    pub sample_b: [f64; 3],
    pub outcome: [f64; 3],
}

impl Default for DualFrameConfig {
    fn default() -> Self {
        Self {
            seed: 2017,
            population: 4000,
            replicates: 500,
            sample_a: [-3.0, 0.5, 0.4],
            sample_b: [-2.8, -0.3, 0.6],
            outcome: [-1.4, 0.6, 0.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualFrameSummary {
    pub replicates: usize,
    pub truth: f64,
    pub mean_estimate: f64,
    pub rel_bias: f64,
    pub empirical_se: f64,
}

fn population(cfg: &DualFrameConfig) -> Vec<DualFrameUnit> {
    let mut rng = substream(cfg.seed, &[purpose::DUAL_FRAME_POPULATION]);
    let lin = |c: &[f64; 3], x: &[f64]| c[0] + c[1] * x[0] + c[2] * x[1];
    (0..cfg.population)
        .map(|i| {
            let x = vec![rng.sample::<f64, _>(StandardNormal), f64::from(u8::from(rng.random_bool(0.5)))];
            let y = f64::from(u8::from(rng.random_bool(expit(lin(&cfg.outcome, &x)))));
            DualFrameUnit {
                id: i.to_string(),
                pi_a: expit(lin(&cfg.sample_a, &x)),
                pi_b: expit(lin(&cfg.sample_b, &x)),
                x,
                y,
            }
        })
        .collect()
}

fn table(units: &[&DualFrameUnit]) -> CovariateTable {
    CovariateTable::new(&["x1", "x2"], units.iter().map(|u| u.x.clone()).collect())
}

fn replicate(units: &[DualFrameUnit], cfg: &DualFrameConfig, rep: usize) -> Result<f64, SimError> {
    let mut rng = substream(cfg.seed, &[purpose::DUAL_FRAME_DRAW, rep as u64]);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for u in units {
        if rng.random_bool(u.pi_a) {
            a.push(u);
        }
        if rng.random_bool(u.pi_b) {
            b.push(u);
        }
    }
    let (ta, tb) = (table(&a), table(&b));
    let (b_for_a, _) = fit_counterfactual(&b.iter().map(|u| u.pi_b).collect::<Vec<_>>(), &tb, &ta)?;
    let (a_for_b, _) = fit_counterfactual(&a.iter().map(|u| u.pi_a).collect::<Vec<_>>(), &ta, &tb)?;
    let mut pooled = Vec::with_capacity(a.len() + b.len());
    for (u, p) in a.iter().zip(b_for_a) {
        pooled.push(PooledSampleMember::new(&u.id, Source::Re, u.pi_a, p, u.pi_a * p)?);
    }
    for (u, p) in b.iter().zip(a_for_b) {
        pooled.push(PooledSampleMember::new(&u.id, Source::Nat, u.pi_b, p, u.pi_b * p)?);
    }
    let mut seen = vec![false; units.len()];
    let mut total = 0.0;
    for m in &pooled {
        let i: usize = m.id.parse().expect("numeric id");
        if !std::mem::replace(&mut seen[i], true) {
            total += units[i].y * m.pooled_weight;
        }
    }
    Ok(total / units.len() as f64)
}

/// Monte Carlo of the pooled mean with counterfactual probabilities estimated
/// by regression on the covariates and overlap `p_own * p_hat_other`.
pub fn run_dual_frame_mc(cfg: &DualFrameConfig) -> Result<DualFrameSummary, SimError> {
    if cfg.replicates == 0 || cfg.population < 10 {
        return Err(SimError::Config("dual-frame run needs replicates and a population of at least 10".into()));
    }
    let units = population(cfg);
    let truth = units.iter().map(|u| u.y).sum::<f64>() / units.len() as f64;
    let est: Vec<f64> =
        (0..cfg.replicates).into_par_iter().map(|r| replicate(&units, cfg, r)).collect::<Result<_, _>>()?;
    let mean = est.iter().sum::<f64>() / est.len() as f64;
    let sd = if est.len() > 1 {
        (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(DualFrameSummary {
        replicates: cfg.replicates,
        truth,
        mean_estimate: mean,
        rel_bias: (mean - truth) / truth,
        empirical_se: sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn micro_design_is_exactly_unbiased() {
        let units = dual_frame_micro_units();
        let r = enumerate_dual_frame(&units, 0.2).unwrap();
        assert_eq!(r.n_outcomes, 4096);
        assert!((r.total_probability - 1.0).abs() < 1e-12);
        assert!((r.expectation - r.truth).abs() < 1e-12, "{} vs {}", r.expectation, r.truth);
        assert!(r.variance > 0.0);
    }

    #[test]
    fn ignoring_overlap_biases_downward() {
        let units = dual_frame_micro_units();
        let r = enumerate_dual_frame(&units, 0.0).unwrap();
        assert!(r.expectation < r.truth);
    }

    #[test]
    fn small_mc_is_deterministic() {
        let cfg = DualFrameConfig { replicates: 20, population: 800, ..Default::default() };
        let a = run_dual_frame_mc(&cfg).unwrap();
        let b = run_dual_frame_mc(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.rel_bias.abs() < 0.2);
    }
}
