//! Systematic PPS selection with certainty units.
//!
//! Positions are kept in integer units scaled by the sample size, so a unit
//! of size `s` in a list of total `T` covers `n s` of the `n T` line and the
//! sampling interval is exactly `T`.

use crate::design::{pps_inclusion, DesignError};

/// Units selected for a start `u` in `[0, 1)`. Certainty units (see
/// [`pps_inclusion`]) are always included; the rest are drawn systematically
/// in list order.
pub fn systematic_pps(sizes: &[u64], n: usize, u: f64) -> Result<Vec<usize>, DesignError> {
    let plan = Plan::new(sizes, n)?;
    Ok(plan.select(u * plan.total as f64))
}

/// Every distinct outcome of [`systematic_pps`] with its probability.
pub fn systematic_pps_outcomes(sizes: &[u64], n: usize) -> Result<Vec<(f64, Vec<usize>)>, DesignError> {
    let plan = Plan::new(sizes, n)?;
    if plan.rest.is_empty() || plan.n_rest == 0 {
        return Ok(vec![(1.0, plan.select(0.0))]);
    }
    let t = plan.total;
    let mut cuts: Vec<u128> = vec![0, t];
    let mut acc = 0u128;
    for &(_, s) in &plan.rest {
        acc += plan.n_rest as u128 * u128::from(s);
        cuts.push(acc % t);
    }
    cuts.sort_unstable();
    cuts.dedup();
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sel = plan.select((a + b) as f64 / 2.0);
        let p = (b - a) as f64 / t as f64;
        match out.iter_mut().find(|(_, s)| *s == sel) {
            Some(slot) => slot.0 += p,
            None => out.push((p, sel)),
        }
    }
    Ok(out)
}

struct Plan {
    certain: Vec<usize>,
    /// (index, size) of the units drawn systematically.
    rest: Vec<(usize, u64)>,
    n_rest: usize,
    /// Sum of the non-certain sizes, which is also the sampling interval.
    total: u128,
}

impl Plan {
    fn new(sizes: &[u64], n: usize) -> Result<Self, DesignError> {
        if n == 0 {
            return Err(DesignError::Precondition("systematic PPS with zero draws".into()));
        }
        let incl = pps_inclusion(sizes, n as u32)?;
        let certain: Vec<usize> = if n >= sizes.len() { (0..sizes.len()).collect() } else { incl.certainty };
        let rest: Vec<(usize, u64)> =
            sizes.iter().enumerate().filter(|(i, _)| !certain.contains(i)).map(|(i, s)| (i, *s)).collect();
        let n_rest = n.min(sizes.len()) - certain.len();
        let total = rest.iter().map(|(_, s)| u128::from(*s)).sum();
        Ok(Self { certain, rest, n_rest, total })
    }

    /// Selection for a start position in `[0, total)`.
    fn select(&self, start: f64) -> Vec<usize> {
        let mut out = self.certain.clone();
        if self.n_rest > 0 {
            let t = self.total as f64;
            let mut lo = 0.0;
            for &(i, s) in &self.rest {
                let hi = lo + (self.n_rest as u128 * u128::from(s)) as f64;
                // a point start + k t falls in [lo, hi)
                let k = ((lo - start) / t).ceil();
                if start + k * t < hi {
                    out.push(i);
                }
                lo = hi;
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_sizes_choose_one_of_two() {
        let out = systematic_pps_outcomes(&[5, 5], 1).unwrap();
        assert_eq!(out, vec![(0.5, vec![0]), (0.5, vec![1])]);
    }

    #[test]
    fn certainty_unit_always_in() {
        let out = systematic_pps_outcomes(&[600, 300, 100], 2).unwrap();
        assert!(out.iter().all(|(_, s)| s.contains(&0) && s.len() == 2));
        let p1: f64 = out.iter().filter(|(_, s)| s.contains(&1)).map(|(p, _)| p).sum();
        assert!((p1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn draw_matches_outcome_set() {
        let sizes = [13, 7, 22, 5, 9, 30];
        let outcomes = systematic_pps_outcomes(&sizes, 3).unwrap();
        for k in 0..200 {
            let sel = systematic_pps(&sizes, 3, k as f64 / 200.0).unwrap();
            assert_eq!(sel.len(), 3);
            assert!(outcomes.iter().any(|(_, s)| *s == sel));
        }
    }

    proptest! {
        #[test]
        fn enumeration_reproduces_pps_probabilities(
            sizes in proptest::collection::vec(1u64..60, 2..12),
            n in 1usize..5,
        ) {
            let outcomes = systematic_pps_outcomes(&sizes, n).unwrap();
            let total_p: f64 = outcomes.iter().map(|(p, _)| p).sum();
            prop_assert!((total_p - 1.0).abs() < 1e-12);
            let incl = pps_inclusion(&sizes, n as u32).unwrap();
            for (j, pi) in incl.probs.iter().enumerate() {
                let freq: f64 = outcomes.iter().filter(|(_, s)| s.contains(&j)).map(|(p, _)| p).sum();
                prop_assert!((freq - pi).abs() < 1e-12, "unit {} freq {} pi {}", j, freq, pi);
            }
            for (_, s) in &outcomes {
                prop_assert_eq!(s.len(), n.min(sizes.len()));
            }
        }
    }
}
