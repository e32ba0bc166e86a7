use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};

/// Which estimator produced a [`ShapleyEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Method {
    ExactSubsets,
    ExactPermutations,
    Partial {
        high_d: usize,
        low_d: usize,
        normalized: bool,
    },
    Permutation {
        requested: usize,
        realized: usize,
        antithetic: bool,
        early_stopped: bool,
    },
    Kernel {
        sampler: String,
        rows: usize,
        enforce_efficiency: bool,
        fit_intercept: bool,
        ridge_used: f64,
    },
    /// Permutations supplied by the caller rather than sampled.
    FixedPermutations {
        count: usize,
    },
}

impl Method {
    pub fn short_name(&self) -> &'static str {
        match self {
            Method::ExactSubsets => "exact",
            Method::ExactPermutations => "exact_permutations",
            Method::Partial { .. } => "partial",
            Method::Permutation { .. } => "perm",
            Method::Kernel { .. } => "kernel",
            Method::FixedPermutations { .. } => "fixed_permutations",
        }
    }
}

/// Per-player Shapley values, optionally with sampling standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyEstimate {
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<Vec<f64>>,
    pub method: Method,
    pub evals_used: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ShapleyEstimate {
    pub fn n_players(&self) -> usize {
        self.values.len()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub(crate) fn check(self) -> Result<Self> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { player: i });
        }
        if let Some(se) = &self.std_err {
            debug_assert_eq!(se.len(), self.values.len());
            debug_assert!(se.iter().all(|s| *s >= 0.0));
        }
        Ok(self)
    }

    pub fn ranking(&self) -> Ranking {
        Ranking::from_scores(&self.values)
    }
}

/// Players ordered most-important first, with their scores.
///
/// Ties are broken by ascending player index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
}

impl Ranking {
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let sorted = order.iter().map(|&i| scores[i]).collect();
        Self {
            order,
            scores: sorted,
        }
    }

    /// A ranking from an explicit order; scores count down from `N`.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &p in &order {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument(format!(
                    "order {order:?} is not a permutation of 0..{n}"
                )));
            }
        }
        let scores = (0..n).map(|pos| (n - pos) as f64).collect();
        Ok(Self { order, scores })
    }

    /// Checks the bijection and non-increasing-score invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.order.len();
        if self.scores.len() != n {
            return Err(Error::InvalidArgument(
                "order and scores differ in length".into(),
            ));
        }
        Self::from_order(self.order.clone())?;
        if self.scores.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "scores must be non-increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn n_players(&self) -> usize {
        self.order.len()
    }

    /// Players from least to most important, ties by ascending index.
    pub fn removal_order(&self) -> Vec<usize> {
        let n = self.order.len();
        let mut score_of = vec![0.0; n];
        for (&p, &s) in self.order.iter().zip(&self.scores) {
            score_of[p] = s;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            score_of[a]
                .partial_cmp(&score_of[b])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
    }

    /// The `k` most important players.
    pub fn top(&self, k: usize) -> Coalition {
        Coalition::from_players(self.order[..k].iter().copied(), self.n_players())
            .expect("ranking holds valid players")
    }

    /// The `k` least important players, i.e. the ones a pruner removes first.
    pub fn bottom(&self, k: usize) -> Coalition {
        Coalition::from_players(self.removal_order()[..k].iter().copied(), self.n_players())
            .expect("ranking holds valid players")
    }
}
