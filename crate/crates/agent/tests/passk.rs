use menter_agent::eval::{pass_at_k, EvalStats};
use proptest::prelude::*;

fn p(n: u64, c: u64, k: u64) -> f64 {
    pass_at_k(EvalStats { n, c, k }).unwrap()
}

/// Fraction of k-subsets of {0..n} that contain one of the first c items.
fn enumerate(n: u32, c: u32, k: u32) -> f64 {
    let correct = (1u32 << c) - 1;
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..1 << n {
        if mask.count_ones() == k {
            total += 1;
            if mask & correct != 0 {
                hit += 1;
            }
        }
    }
    hit as f64 / total as f64
}

#[test]
fn matches_subset_enumeration_exactly() {
    for n in 1..=10u32 {
        for c in 0..=n {
            for k in 1..=n {
                assert_eq!(p(n as u64, c as u64, k as u64), enumerate(n, c, k), "n={n} c={c} k={k}");
            }
        }
    }
}

/// splitmix64: fast, and good enough equidistribution for subset draws.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        ((self.next() >> 32) * n as u64 >> 32) as usize
    }
}

/// One shuffled ordering per sample: its first k items are a uniform
/// k-subset for every k at once, and item indices below c are the correct ones.
#[test]
fn matches_monte_carlo_within_three_sigma() {
    const SAMPLES: usize = 1_000_000;
    let mut rng = SplitMix(1);
    for n in 1..=10usize {
        // hits[c][k]: samples where one of the first k drawn items is < c.
        let mut hits = vec![vec![0u64; n + 1]; n + 1];
        let mut perm: Vec<usize> = (0..n).collect();
        for _ in 0..SAMPLES {
            for i in (1..n).rev() {
                perm.swap(i, rng.below(i + 1));
            }
            // first[c]: earliest position holding an item below c.
            let mut first = [usize::MAX; 11];
            for (pos, &item) in perm.iter().enumerate() {
                for f in first.iter_mut().take(n + 1).skip(item + 1) {
                    if *f == usize::MAX {
                        *f = pos;
                    }
                }
            }
            for c in 1..=n {
                for k in first[c] + 1..=n {
                    hits[c][k] += 1;
                }
            }
        }
        for c in 0..=n {
            for k in 1..=n {
                let exact = p(n as u64, c as u64, k as u64);
                let est = hits[c][k] as f64 / SAMPLES as f64;
                let sigma = (exact * (1.0 - exact) / SAMPLES as f64).sqrt();
                assert!((est - exact).abs() <= 3.0 * sigma + 1e-12, "n={n} c={c} k={k}: {est} vs {exact}");
            }
        }
    }
}

proptest! {
    #[test]
    fn monotone_in_k_and_c(n in 1u64..60, c_frac in 0.0f64..=1.0, k_frac in 0.0f64..=1.0) {
        let c = (c_frac * n as f64).floor() as u64;
        let k = ((k_frac * n as f64).floor() as u64).max(1);
        let v = p(n, c, k);
        prop_assert!((0.0..=1.0).contains(&v));
        if k < n { prop_assert!(p(n, c, k + 1) >= v); }
        if c < n { prop_assert!(p(n, c + 1, k) >= v); }
    }

    #[test]
    fn pass_at_one_is_the_success_rate(n in 1u64..1000, c_frac in 0.0f64..=1.0) {
        let c = (c_frac * n as f64).floor() as u64;
        prop_assert_eq!(p(n, c, 1), c as f64 / n as f64);
    }

    #[test]
    fn pass_at_n_is_one_iff_any_success(n in 1u64..200, c_frac in 0.0f64..=1.0) {
        let c = (c_frac * n as f64).floor() as u64;
        prop_assert_eq!(p(n, c, n) == 1.0, c >= 1);
    }
}
