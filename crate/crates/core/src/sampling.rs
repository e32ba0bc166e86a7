//! Monte-Carlo Shapley estimation over uniformly random permutations.
//!
//! Permutation `j` is drawn by Fisher–Yates from a ChaCha8 stream keyed on
//! `(seed, j)`, so any number of workers reproduces the sequential result.
//! Permutations are processed in fixed-size batches and folded in index order;
//! early stopping is checked after every permutation of the fold.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Method, ShapleyEstimate};
use crate::game::Game;

const BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    /// Compare the running mean with its value this many permutations ago.
    pub window: usize,
    /// Stop once no player's running mean moved by `epsilon` or more.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n_permutations: usize,
    pub seed: u64,
    pub early_stop: Option<EarlyStop>,
    /// Pair every permutation with its reverse.
    pub antithetic: bool,
}

impl SamplingConfig {
    pub fn new(n_permutations: usize, seed: u64) -> Self {
        Self {
            n_permutations,
            seed,
            early_stop: None,
            antithetic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_permutations == 0 {
            return Err(Error::InvalidArgument(
                "n_permutations must be at least 1".into(),
            ));
        }
        if let Some(stop) = self.early_stop {
            if stop.window < 2 {
                return Err(Error::InvalidArgument(
                    "early-stop window must be at least 2".into(),
                ));
            }
            if stop.epsilon.is_nan() || stop.epsilon <= 0.0 {
                return Err(Error::InvalidArgument(
                    "early-stop epsilon must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// The `index`-th permutation of `0..n` for a given seed.
pub fn sample_permutation(seed: u64, index: u64, n: usize, antithetic: bool) -> Vec<usize> {
    let stream = if antithetic { index / 2 } else { index };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    if antithetic && index % 2 == 1 {
        perm.reverse();
    }
    perm
}

/// Marginal contribution of each player along the prefix chain of `perm`.
/// The entries telescope to `ν(N) − ν(∅)`.
pub fn permutation_marginals(game: &Game, perm: &[usize]) -> Result<Vec<f64>> {
    let mut marginals = vec![0.0; game.n_players()];
    let mut bits = 0u64;
    let mut prev = game.empty_value();
    for &p in perm {
        bits |= 1 << p;
        let cur = game.evaluate_bits(bits)?;
        marginals[p] = cur - prev;
        prev = cur;
    }
    Ok(marginals)
}

/// Running per-player mean and variance (Welford).
struct Accumulator {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    fn push(&mut self, sample: &[f64]) {
        self.count += 1;
        let c = self.count as f64;
        for ((m, s2), x) in self.mean.iter_mut().zip(&mut self.m2).zip(sample) {
            let delta = x - *m;
            *m += delta / c;
            *s2 += delta * (x - *m);
        }
    }

    fn std_err(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let c = self.count as f64;
        self.m2
            .iter()
            .map(|s2| ((s2 / (c - 1.0)).max(0.0) / c).sqrt())
            .collect()
    }
}

pub fn shapley_sample_permutations(game: &Game, cfg: &SamplingConfig) -> Result<ShapleyEstimate> {
    cfg.validate()?;
    let n = game.n_players();
    let mut acc = Accumulator::new(n);
    let mut touched: HashSet<u64> = HashSet::new();
    touched.insert(0);
    let window = cfg.early_stop.map_or(0, |s| s.window);
    let mut history: VecDeque<Vec<f64>> = VecDeque::with_capacity(window + 1);
    let mut stopped = false;

    let mut start = 0usize;
    'outer: while start < cfg.n_permutations {
        let end = (start + BATCH).min(cfg.n_permutations);
        let batch: Vec<(Vec<usize>, Vec<f64>)> = (start..end)
            .into_par_iter()
            .map(|j| {
                let perm = sample_permutation(cfg.seed, j as u64, n, cfg.antithetic);
                let marginals = permutation_marginals(game, &perm)?;
                Ok((perm, marginals))
            })
            .collect::<Result<_>>()?;

        for (perm, marginals) in batch {
            let mut bits = 0u64;
            for &p in &perm {
                bits |= 1 << p;
                touched.insert(bits);
            }
            acc.push(&marginals);
            if let Some(stop) = cfg.early_stop {
                history.push_back(acc.mean.clone());
                if history.len() > stop.window + 1 {
                    history.pop_front();
                }
                if history.len() == stop.window + 1 {
                    let old = &history[0];
                    let moved = acc
                        .mean
                        .iter()
                        .zip(old)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    if moved < stop.epsilon {
                        stopped = true;
                        break 'outer;
                    }
                }
            }
        }
        start = end;
    }

    ShapleyEstimate {
        std_err: Some(acc.std_err()),
        values: acc.mean,
        method: Method::Permutation {
            requested: cfg.n_permutations,
            realized: acc.count,
            antithetic: cfg.antithetic,
            early_stopped: stopped,
        },
        evals_used: touched.len() as u64,
        seed: Some(cfg.seed),
    }
    .check()
}

/// Averages marginals over caller-supplied permutations. Each entry must be a
/// permutation of `0..N`.
pub fn shapley_from_permutations(game: &Game, perms: &[Vec<usize>]) -> Result<ShapleyEstimate> {
    let n = game.n_players();
    if perms.is_empty() {
        return Err(Error::InvalidArgument("no permutations given".into()));
    }
    let mut acc = Accumulator::new(n);
    let mut touched: HashSet<u64> = HashSet::from([0]);
    for perm in perms {
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        if sorted != (0..n).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
        let mut bits = 0u64;
        for &p in perm {
            bits |= 1 << p;
            touched.insert(bits);
        }
        acc.push(&permutation_marginals(game, perm)?);
    }
    ShapleyEstimate {
        std_err: Some(acc.std_err()),
        values: acc.mean,
        method: Method::FixedPermutations { count: perms.len() },
        evals_used: touched.len() as u64,
        seed: None,
    }
    .check()
}
