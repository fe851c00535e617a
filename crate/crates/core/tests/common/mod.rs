//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use surveyforge::domain::Outcome;
use surveyforge::estimate::{CiMethod, EstimateOptions, SurveyDesign};
use surveyforge::frame::{CountRange, EffectSizes, EligibleWomenModel, FrameGenConfig, OutcomeTargets, ResponseModel};
use surveyforge::glm::DesignMatrix;
use surveyforge::sim::{Assertions, SampleDesign, ScenarioConfig, WeightingMode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derivative-free minimizer: Nelder-Mead with the usual coefficients,
/// restarted from the best vertex until a restart stops improving.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64) -> Vec<f64> {
    let n = x0.len();
    let mut best = x0.to_vec();
    let mut f_best = f(&best);
    let mut step = step;
    for _ in 0..200 {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut v = best.clone();
            v[i] += step;
            simplex.push(v);
        }
        let mut fs: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        for _ in 0..20_000 {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            fs = order.iter().map(|&i| fs[i]).collect();
            if (fs[n] - fs[0]).abs() <= 1e-16 * (1.0 + fs[0].abs()) {
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
            let along =
                |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
            let xr = along(-1.0);
            let fr = f(&xr);
            if fr < fs[0] {
                let xe = along(-2.0);
                let fe = f(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    fs[n] = fe;
                } else {
                    simplex[n] = xr;
                    fs[n] = fr;
                }
            } else if fr < fs[n - 1] {
                simplex[n] = xr;
                fs[n] = fr;
            } else {
                let (xc, fc) = if fr < fs[n] {
                    let x = along(-0.5);
                    let v = f(&x);
                    (x, v)
                } else {
                    let x = along(0.5);
                    let v = f(&x);
                    (x, v)
                };
                if fc < fs[n].min(fr) {
                    simplex[n] = xc;
                    fs[n] = fc;
                } else {
                    for i in 1..=n {
                        simplex[i] = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                        fs[i] = f(&simplex[i]);
                    }
                }
            }
        }
        let k = (0..=n).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap();
        let improved = f_best - fs[k];
        if fs[k] <= f_best {
            best = simplex[k].clone();
            f_best = fs[k];
        }
        if improved <= 1e-15 * (1.0 + f_best.abs()) && step < 1e-6 {
            break;
        }
        step = (step * 0.1).max(1e-9);
    }
    best
}

/// Weighted Bernoulli log-likelihood at `beta`.
pub fn weighted_loglik(x: &DesignMatrix, y: &[f64], w: &[f64], beta: &[f64]) -> f64 {
    (0..x.nrows())
        .map(|i| {
            let eta: f64 = x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
            // log(1 + e^eta) without overflow
            let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            w[i] * (y[i] * eta - softplus)
        })
        .sum()
}

/// Weighted score `X' W (y - p)` at `beta`.
pub fn weighted_score(x: &DesignMatrix, y: &[f64], w: &[f64], beta: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; x.ncols()];
    for i in 0..x.nrows() {
        let row = x.row(i);
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let p = 1.0 / (1.0 + (-eta).exp());
        for (j, xij) in row.iter().enumerate() {
            s[j] += w[i] * (y[i] - p) * xij;
        }
    }
    s
}

/// Three small weighted logit problems with overlapping classes.
pub fn logit_datasets() -> Vec<(String, DesignMatrix, Vec<f64>, Vec<f64>)> {
    let specs: [(&str, usize, Vec<f64>, u64); 3] = [
        ("n20_two_covariates", 20, vec![-0.3, 0.8, -0.6], 11),
        ("n45_binary_and_normal", 45, vec![0.4, -1.1, 0.9], 12),
        ("n60_three_covariates", 60, vec![-0.8, 0.5, 0.7, -0.4], 13),
    ];
    specs
        .into_iter()
        .map(|(name, n, beta, seed)| {
            let mut r = rng(seed);
            let k = beta.len() - 1;
            let rows: Vec<Vec<f64>> =
                (0..n)
                    .map(|i| {
                        (0..k)
                            .map(|j| {
                                if j == 1 {
                                    f64::from(u8::from(i % 3 != 0))
                                } else {
                                    r.sample::<f64, _>(StandardNormal)
                                }
                            })
                            .collect()
                    })
                    .collect();
            let y: Vec<f64> = rows
                .iter()
                .map(|row| {
                    let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
                    f64::from(u8::from(r.random_bool(1.0 / (1.0 + (-eta).exp()))))
                })
                .collect();
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.5..3.0)).collect();
            let names: Vec<String> = (1..=k).map(|j| format!("x{j}")).collect();
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            (name.to_string(), DesignMatrix::with_intercept(&names, &rows).unwrap(), y, w)
        })
        .collect()
}

/// The two-by-two fixed point under independence, `r_i c_j / N`.
pub fn ipf_2x2_fixed_point(rows: [f64; 2], cols: [f64; 2]) -> [[f64; 2]; 2] {
    let total = rows[0] + rows[1];
    [[rows[0] * cols[0] / total, rows[0] * cols[1] / total], [rows[1] * cols[0] / total, rows[1] * cols[1] / total]]
}

/// Three strata: two PSUs, three PSUs and a singleton. Returns the design,
/// indicators and the hand-computed variance 25664/1185921.
pub fn lonely_psu_fixture() -> (SurveyDesign, Vec<Option<bool>>, f64) {
    let rows: [(&str, &str, f64, bool); 10] = [
        ("A", "a1", 1.0, true),
        ("A", "a1", 2.0, false),
        ("A", "a2", 1.5, true),
        ("B", "b1", 2.0, false),
        ("B", "b1", 1.0, true),
        ("B", "b2", 1.0, false),
        ("B", "b3", 3.0, true),
        ("C", "c1", 2.0, true),
        ("C", "c1", 1.0, false),
        ("C", "c1", 2.0, false),
    ];
    let design = SurveyDesign::new(
        rows.iter().map(|r| r.0.to_string()).collect(),
        rows.iter().map(|r| r.1.to_string()).collect(),
        rows.iter().map(|r| r.2).collect(),
    )
    .unwrap();
    // p = 17/33; PSU score totals A: -4/121, 16/363; B: -4/121, -34/1089,
    // 32/363; C: -38/1089
    (design, rows.iter().map(|r| Some(r.3)).collect(), 25664.0 / 1_185_921.0)
}

/// Single city, four strata of about 40 neighborhoods, five PSUs per stratum,
/// three tracts per PSU and eight visits per tract; full response and a
/// uniform prevalence of 0.2.
pub fn reference_scenario(replicates: usize) -> ScenarioConfig {
    ScenarioConfig {
        name: "reference".into(),
        seed: 20160,
        replicates,
        frame: FrameGenConfig {
            seed: 2016,
            n_cities: 1,
            n_neighborhoods: 160,
            tracts_per_neighborhood: CountRange::new(4, 8),
            households_per_tract: CountRange::new(40, 120),
            eligible_women: EligibleWomenModel { p_zero: 0.0, mean_extra: 0.4, max: 6 },
            prevalence: OutcomeTargets::uniform(0.2),
            section_response: ResponseModel::constant(1.0),
            household_response: [1.0, 1.0],
            ..Default::default()
        },
        sample: SampleDesign {
            psus_per_stratum: 5,
            tracts_per_psu: 3,
            visits_per_tract: CountRange::fixed(8),
            household_response: None,
        },
        weighting: WeightingMode::default(),
        estimate: EstimateOptions { ci: CiMethod::Logit, level: 0.95 },
        outcomes: vec![Outcome::grid()[0], Outcome::grid()[2], Outcome::grid()[4]],
        assertions: Assertions { max_abs_rel_bias: Some(0.01), coverage: Some([0.91, 0.98]), median_var_ratio: None },
        ..Default::default()
    }
}

/// Nearly self-weighting design: equal tract sizes, one eligible woman per
/// household, full household response. Only the section response varies.
fn self_weighting(
    name: &str,
    seed: u64,
    replicates: usize,
    effects: EffectSizes,
    response: ResponseModel,
) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        seed,
        replicates,
        frame: FrameGenConfig {
            seed: seed + 1,
            n_cities: 1,
            n_neighborhoods: 120,
            tracts_per_neighborhood: CountRange::fixed(5),
            households_per_tract: CountRange::fixed(80),
            eligible_women: EligibleWomenModel { p_zero: 0.0, mean_extra: 0.0, max: 1 },
            effects,
            section_response: response,
            household_response: [1.0, 1.0],
            ..Default::default()
        },
        sample: SampleDesign {
            psus_per_stratum: 6,
            tracts_per_psu: 3,
            visits_per_tract: CountRange::fixed(12),
            household_response: None,
        },
        weighting: WeightingMode { section_nonresponse: true, ..Default::default() },
        ..Default::default()
    }
}

/// Section response and victimization both rise with knowing a victim and
/// with cohabitation.
pub fn mar_scenario(replicates: usize) -> ScenarioConfig {
    let effects =
        EffectSizes { cohab: 0.8, know_victim: 1.6, children: 0.0, young: 0.0, household_size: 0.0, tract_sd: 0.0 };
    let response = ResponseModel { intercept: -0.4, cohab: 1.0, know_victim: 2.0, children: 0.0 };
    ScenarioConfig {
        assertions: Assertions { median_var_ratio: Some([0.0, 1.0]), ..Default::default() },
        ..self_weighting("mar", 3101, replicates, effects, response)
    }
}

/// Section response depends on covariates that do not predict victimization.
pub fn mcar_scenario(replicates: usize) -> ScenarioConfig {
    let response = ResponseModel { intercept: 1.2, cohab: -0.3, know_victim: 0.3, children: -0.2 };
    ScenarioConfig {
        assertions: Assertions { median_var_ratio: Some([0.95, 1.15]), ..Default::default() },
        ..self_weighting("mcar", 3202, replicates, EffectSizes::none(), response)
    }
}
