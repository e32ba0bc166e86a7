//! Partial Shapley values: the subset sum restricted to a band of coalition sizes.
//!
//! The band keeps the large coalitions `{N−d, …, N−1}` and optionally the small
//! ones `{0, …, d′−1}`. With `d = 1` this is leave-one-out: each player is
//! scored by `ν(N) − ν(N ∖ {i})`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::SubsetsOfSize;
use crate::combinatorics::{binomial, shapley_weight};
use crate::error::{Error, Result};
use crate::estimate::{Method, ShapleyEstimate};
use crate::game::Game;

/// Most coalitions a single call may enumerate per player.
pub const PARTIAL_BUDGET: u128 = 10_000_000;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBand {
    /// Include coalition sizes `N−high_d ..= N−1`.
    pub high_d: usize,
    /// Include coalition sizes `0 .. low_d`.
    pub low_d: usize,
}

impl SizeBand {
    pub fn new(high_d: usize, low_d: usize) -> Self {
        Self { high_d, low_d }
    }

    pub fn leave_one_out() -> Self {
        Self::new(1, 0)
    }

    /// Every size `0..N`; reproduces the exact Shapley value.
    pub fn full(n_players: usize) -> Self {
        Self::new(n_players, 0)
    }

    pub fn validate(&self, n_players: usize) -> Result<()> {
        if self.high_d == 0 {
            return Err(Error::InvalidArgument("high_d must be at least 1".into()));
        }
        if self.high_d + self.low_d > n_players {
            return Err(Error::InvalidArgument(format!(
                "band high_d={} low_d={} overlaps or exceeds {n_players} players",
                self.high_d, self.low_d
            )));
        }
        Ok(())
    }

    /// Included coalition sizes, ascending.
    pub fn sizes(&self, n_players: usize) -> Vec<usize> {
        (0..self.low_d)
            .chain(n_players - self.high_d..n_players)
            .collect()
    }
}

/// How the per-size Shapley weights are scaled inside the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandWeighting {
    /// Rescale so the included weights sum to one: the estimate is the mean,
    /// over included sizes, of the average marginal at that size.
    #[default]
    Normalized,
    /// Keep the unrestricted weights `1 / (N·C(N−1, k))` as they are.
    Raw,
}

/// Per-coalition weight for each included size, as `(size, weight)`.
pub fn band_weights(
    n_players: usize,
    band: SizeBand,
    weighting: BandWeighting,
) -> Result<Vec<(usize, f64)>> {
    band.validate(n_players)?;
    let sizes = band.sizes(n_players);
    let count = sizes.len() as f64;
    Ok(sizes
        .into_iter()
        .map(|k| {
            let w = match weighting {
                BandWeighting::Raw => shapley_weight(n_players, k),
                // 1 / (|sizes| · C(N−1, k))
                BandWeighting::Normalized => {
                    shapley_weight(n_players, k) * n_players as f64 / count
                }
            };
            (k, w)
        })
        .collect())
}

pub fn shapley_partial(game: &Game, band: SizeBand) -> Result<ShapleyEstimate> {
    shapley_partial_weighted(game, band, BandWeighting::Normalized)
}

pub fn shapley_partial_weighted(
    game: &Game,
    band: SizeBand,
    weighting: BandWeighting,
) -> Result<ShapleyEstimate> {
    let n = game.n_players();
    let weights = band_weights(n, band, weighting)?;
    let required: u128 = weights.iter().map(|&(k, _)| binomial(n - 1, k)).sum();
    if required > PARTIAL_BUDGET {
        return Err(Error::Budget {
            what: format!("partial band high_d={} low_d={}", band.high_d, band.low_d),
            required,
            budget: PARTIAL_BUDGET,
        });
    }

    let mut values = vec![0.0; n];
    for &(k, w) in &weights {
        let sums = marginal_sums_at_size(game, k)?;
        for (v, s) in values.iter_mut().zip(sums) {
            *v += w * s;
        }
    }

    let mut touched: Vec<usize> = weights.iter().flat_map(|&(k, _)| [k, k + 1]).collect();
    touched.sort_unstable();
    touched.dedup();
    let evals_used = touched.iter().map(|&s| binomial(n, s)).sum::<u128>() as u64;

    ShapleyEstimate {
        values,
        std_err: None,
        method: Method::Partial {
            high_d: band.high_d,
            low_d: band.low_d,
            normalized: weighting == BandWeighting::Normalized,
        },
        evals_used,
        seed: None,
    }
    .check()
}

/// Leave-one-out scores `ν(N) − ν(N ∖ {i})`.
pub fn leave_one_out(game: &Game) -> Result<ShapleyEstimate> {
    if game.n_players() == 0 {
        return Err(Error::InvalidArgument(
            "leave-one-out needs at least one player".into(),
        ));
    }
    shapley_partial(game, SizeBand::leave_one_out())
}

/// For each player `i`, the unweighted sum of `ν(K ∪ {i}) − ν(K)` over all
/// `K` of size `k` not containing `i`.
fn marginal_sums_at_size(game: &Game, k: usize) -> Result<Vec<f64>> {
    let n = game.n_players();
    let masks: Vec<u64> = SubsetsOfSize::new(n, k).collect();
    let partials: Vec<Vec<f64>> = masks
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sums = vec![0.0; n];
            for &s in chunk {
                let base = game.evaluate_bits(s)?;
                for (i, sum) in sums.iter_mut().enumerate() {
                    if s >> i & 1 == 0 {
                        *sum += game.evaluate_bits(s | 1 << i)? - base;
                    }
                }
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}
