//! Exact Shapley values by full enumeration.
//!
//! Two independent routes are provided: a sum over the coalitions not
//! containing each player, weighted by `1 / (N·C(N−1, |K|))`, and an average
//! of marginal contributions over all `N!` orderings of the players. They
//! serve as each other's check and as ground truth for the approximations.

use rayon::prelude::*;

use crate::combinatorics::binomial;
use crate::error::Result;
use crate::estimate::{Method, ShapleyEstimate};
use crate::game::Game;

pub const MAX_SUBSET_PLAYERS: usize = 24;
pub const MAX_PERMUTATION_PLAYERS: usize = 10;

/// Exact Shapley values by enumerating all `2^N` coalitions.
pub fn shapley_exact_subsets(game: &Game) -> Result<ShapleyEstimate> {
    let n = game.n_players();
    let table = game.dense_values(MAX_SUBSET_PLAYERS, "exact subset enumeration")?;
    let values = shapley_from_table(n, &table);
    ShapleyEstimate {
        values,
        std_err: None,
        method: Method::ExactSubsets,
        evals_used: table.len() as u64,
        seed: None,
    }
    .check()
}

/// Shapley values from a dense table indexed by coalition bitmask.
pub(crate) fn shapley_from_table(n: usize, table: &[f64]) -> Vec<f64> {
    debug_assert_eq!(table.len(), 1 << n);
    let counts: Vec<f64> = (0..n).map(|k| binomial(n - 1, k) as f64).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let bit = 1usize << i;
            // Marginals are averaged per coalition size, then over sizes.
            let mut per_size = vec![0.0; n];
            for (s, &without) in table.iter().enumerate() {
                if s & bit == 0 {
                    per_size[s.count_ones() as usize] += table[s | bit] - without;
                }
            }
            per_size
                .iter()
                .zip(&counts)
                .map(|(m, c)| m / c)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Exact Shapley values by averaging marginals over all `N!` permutations.
pub fn shapley_exact_permutations(game: &Game) -> Result<ShapleyEstimate> {
    let n = game.n_players();
    let table = game.dense_values(MAX_PERMUTATION_PLAYERS, "exact permutation enumeration")?;
    if n == 0 {
        return ShapleyEstimate {
            values: Vec::new(),
            std_err: None,
            method: Method::ExactPermutations,
            evals_used: 1,
            seed: None,
        }
        .check();
    }

    // One task per leading player; partial sums merge in a fixed order.
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut sums = vec![0.0; n];
            let mut rest: Vec<usize> = (0..n).filter(|&p| p != first).collect();
            let mut perm = Vec::with_capacity(n);
            for_each_permutation(&mut rest, |tail| {
                perm.clear();
                perm.push(first);
                perm.extend_from_slice(tail);
                accumulate_marginals(&table, &perm, &mut sums);
            });
            sums
        })
        .collect();

    let count: f64 = (1..=n).map(|k| k as f64).product();
    let mut values = vec![0.0; n];
    for part in &partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    values.iter_mut().for_each(|v| *v /= count);
    ShapleyEstimate {
        values,
        std_err: None,
        method: Method::ExactPermutations,
        evals_used: table.len() as u64,
        seed: None,
    }
    .check()
}

/// Adds each player's marginal along the prefix chain of `perm`.
#[inline]
fn accumulate_marginals(table: &[f64], perm: &[usize], sums: &mut [f64]) {
    let mut bits = 0usize;
    let mut prev = table[0];
    for &p in perm {
        bits |= 1 << p;
        let cur = table[bits];
        sums[p] += cur - prev;
        prev = cur;
    }
}

/// Heap's algorithm, visiting every ordering of `items` once.
pub(crate) fn for_each_permutation<F: FnMut(&[usize])>(items: &mut [usize], mut visit: F) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
