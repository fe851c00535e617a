use super::FrameError;

pub const N_STRATA: usize = 4;

/// Splits neighborhoods into four household-count quartile strata.
///
/// Neighborhoods are ranked by decreasing household count (ties by ascending
/// id) and accumulated in order. A neighborhood whose addition would carry the
/// running total past the current 25% boundary opens the next stratum; no
/// neighborhood is ever split and the fourth stratum takes the remainder. If
/// the list would run out before four strata exist, each remaining neighborhood
/// opens its own stratum.
pub fn build_strata(neighborhoods: &[(String, u64)]) -> Result<Vec<Vec<(String, u64)>>, FrameError> {
    if neighborhoods.len() < N_STRATA {
        return Err(FrameError::Config(format!(
            "need at least {N_STRATA} neighborhoods to stratify, got {}",
            neighborhoods.len()
        )));
    }
    if let Some((id, _)) = neighborhoods.iter().find(|(_, n)| *n == 0) {
        return Err(FrameError::Config(format!("neighborhood `{id}` has no households")));
    }

    let mut ranked = neighborhoods.to_vec();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total: u64 = ranked.iter().map(|(_, n)| n).sum();
    let boundary = |k: usize| (k + 1) as f64 * total as f64 / N_STRATA as f64;

    let mut strata: Vec<Vec<(String, u64)>> = vec![Vec::new(); N_STRATA];
    let mut k = 0;
    let mut cumulative = 0u64;
    let n = ranked.len();
    for (i, item) in ranked.into_iter().enumerate() {
        let remaining = n - i;
        if k + 1 < N_STRATA && !strata[k].is_empty() {
            let crosses = (cumulative + item.1) as f64 > boundary(k);
            let forced = remaining == N_STRATA - 1 - k;
            if crosses || forced {
                k += 1;
            }
        }
        cumulative += item.1;
        strata[k].push(item);
    }
    Ok(strata)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nb(counts: &[u64]) -> Vec<(String, u64)> {
        counts.iter().enumerate().map(|(i, &c)| (format!("N{i:03}"), c)).collect()
    }

    fn sizes(strata: &[Vec<(String, u64)>]) -> Vec<Vec<u64>> {
        strata.iter().map(|s| s.iter().map(|x| x.1).collect()).collect()
    }

    #[test]
    fn equal_neighborhoods_one_per_stratum() {
        let s = build_strata(&nb(&[100; 4])).unwrap();
        assert_eq!(sizes(&s), vec![vec![100]; 4]);
    }

    #[test]
    fn descending_counts_hand_trace() {
        // total 1000, boundaries 250/500/750: each addition crosses the next boundary
        let s = build_strata(&nb(&[100, 300, 400, 200])).unwrap();
        assert_eq!(sizes(&s), vec![vec![400], vec![300], vec![200], vec![100]]);
    }

    #[test]
    fn eight_equal_neighborhoods_pair_up() {
        let s = build_strata(&nb(&[100; 8])).unwrap();
        assert_eq!(sizes(&s), vec![vec![100, 100]; 4]);
    }

    #[test]
    fn ties_break_by_id() {
        let s = build_strata(&nb(&[5, 5, 5, 5])).unwrap();
        let ids: Vec<&str> = s.iter().map(|x| x[0].0.as_str()).collect();
        assert_eq!(ids, ["N000", "N001", "N002", "N003"]);
    }

    #[test]
    fn dominant_neighborhood_still_gives_four_strata() {
        let s = build_strata(&nb(&[1000, 1, 1, 1])).unwrap();
        assert_eq!(sizes(&s), vec![vec![1000], vec![1], vec![1], vec![1]]);
    }

    #[test]
    fn too_few_neighborhoods() {
        assert!(matches!(build_strata(&nb(&[1, 2, 3])), Err(FrameError::Config(_))));
    }

    proptest! {
        #[test]
        fn strata_partition_and_band(counts in proptest::collection::vec(1u64..500, 4..60)) {
            let input = nb(&counts);
            let strata = build_strata(&input).unwrap();
            prop_assert_eq!(strata.len(), 4);
            prop_assert!(strata.iter().all(|s| !s.is_empty()));

            let mut seen: Vec<String> = strata.iter().flatten().map(|x| x.0.clone()).collect();
            seen.sort();
            let mut expected: Vec<String> = input.iter().map(|x| x.0.clone()).collect();
            expected.sort();
            prop_assert_eq!(seen, expected);

            let total: u64 = counts.iter().sum();
            let max_share = *counts.iter().max().unwrap() as f64 / total as f64;
            for s in &strata {
                let share = s.iter().map(|x| x.1).sum::<u64>() as f64 / total as f64;
                prop_assert!((share - 0.25).abs() <= max_share + 1e-12,
                    "share {} max single share {}", share, max_share);
            }
        }
    }
}
