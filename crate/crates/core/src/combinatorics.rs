//! Binomial coefficients and the per-size Shapley weights.

/// `ln C(n, k)` via a running sum of logs; exact enough for n ≤ 64.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n);
    let k = k.min(n - k);
    (0..k)
        .map(|j| ((n - j) as f64).ln() - ((j + 1) as f64).ln())
        .sum()
}

/// `C(n, k)` as an integer. Saturates at `u128::MAX` (never reached for n ≤ 64).
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // acc * (n - j) is divisible by (j + 1) at every step.
        acc = acc.saturating_mul((n - j) as u128) / (j as u128 + 1);
    }
    acc
}

/// Weight `1 / (n · C(n-1, k))` of a size-`k` coalition in the Shapley sum,
/// computed in log space.
pub fn shapley_weight(n: usize, k: usize) -> f64 {
    assert!(n >= 1 && k < n);
    (-(n as f64).ln() - ln_binomial(n - 1, k)).exp()
}

/// `shapley_weight(n, k)` for every `k in 0..n`.
pub fn shapley_weights(n: usize) -> Vec<f64> {
    (0..n).map(|k| shapley_weight(n, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(23, 11), 1_352_078);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn log_binomial_matches_integer() {
        for n in 0..=40 {
            for k in 0..=n {
                let exact = binomial(n, k) as f64;
                let rel = (ln_binomial(n, k).exp() - exact).abs() / exact;
                assert!(rel < 1e-12, "n={n} k={k} rel={rel}");
            }
        }
    }

    #[test]
    fn weights_sum_to_one_over_coalitions() {
        for n in 1..=24 {
            let total: f64 = (0..n)
                .map(|k| binomial(n - 1, k) as f64 * shapley_weight(n, k))
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n}");
        }
    }
}
