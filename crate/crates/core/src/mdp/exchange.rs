use crate::trace::ConfidenceSample;

/// Largest sample count the exhaustive check accepts.
const MAX_EXHAUSTIVE: usize = 20;

/// Checks that, among all exit sets of exactly `k` samples, exiting the `k`
/// samples with the smallest confidence gap maximizes
/// `sum_exit z_e + sum_continue z_c`.
///
/// With the exit count pinned, any optimal exit set is a lower set of the
/// gap ordering, which is what makes per-state thresholds sufficient.
///
/// # Panics
/// If `k > n` or `n > 20`.
pub fn threshold_exchange_check(samples: &[ConfidenceSample], k: usize) -> bool {
    let n = samples.len();
    assert!(k <= n, "exit count {k} exceeds sample count {n}");
    assert!(n <= MAX_EXHAUSTIVE, "exhaustive check supports at most {MAX_EXHAUSTIVE} samples");

    let value = |mask: u32| -> f64 {
        samples
            .iter()
            .enumerate()
            .map(|(i, s)| if mask & (1 << i) != 0 { s.z_e } else { s.z_c })
            .sum()
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].gap().total_cmp(&samples[b].gap()));
    let threshold_mask = order[..k].iter().fold(0u32, |m, &i| m | (1 << i));
    let threshold_value = value(threshold_mask);

    let best = (0u32..(1u32 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(value)
        .fold(f64::NEG_INFINITY, f64::max);
    threshold_value >= best - 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use rand::Rng;

    fn random_samples(n: usize, seed: u64) -> Vec<ConfidenceSample> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| ConfidenceSample {
                z_e: rng.random_range(0.1..=1.0),
                z_c: rng.random_range(0.1..=1.0),
                correct_e: true,
                correct_c: true,
            })
            .collect()
    }

    #[test]
    fn extreme_exit_counts() {
        let s = random_samples(8, 1);
        assert!(threshold_exchange_check(&s, 0));
        assert!(threshold_exchange_check(&s, 8));
    }

    #[test]
    fn every_k_on_random_twelve() {
        for seed in 0..20 {
            let s = random_samples(12, seed);
            for k in 0..=12 {
                assert!(threshold_exchange_check(&s, k), "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn ties_in_gap_are_allowed() {
        let s = vec![
            ConfidenceSample { z_e: 0.5, z_c: 0.7, correct_e: true, correct_c: true },
            ConfidenceSample { z_e: 0.3, z_c: 0.5, correct_e: true, correct_c: true },
            ConfidenceSample { z_e: 0.6, z_c: 0.6, correct_e: true, correct_c: true },
        ];
        for k in 0..=3 {
            assert!(threshold_exchange_check(&s, k));
        }
    }
}
