//! Oracle subsets, the Oracle rank, and the size-weighted Jaccard score.
//!
//! For every size `K` the oracle subsets are all coalitions that are best by
//! exhaustive search: in keep mode the kept sets of size `K` with maximal `ν`,
//! in remove mode the removed sets of size `K` whose complement has maximal
//! `ν`. A ranking is scored by comparing its first `K` selections (the `K`
//! most important players in keep mode, the `K` least important in remove
//! mode) with the oracle subsets of that size.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, SubsetsOfSize};
use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::estimate::Ranking;
use crate::exact::for_each_permutation;
use crate::game::Game;

/// Most coalitions enumerated for a single oracle size.
pub const ORACLE_BUDGET: u128 = 10_000_000;

/// Most prefix states visited by the chain search.
pub const CHAIN_STATE_BUDGET: u128 = 4_000_000;

/// Largest game accepted by [`best_order_exhaustive`].
pub const MAX_EXHAUSTIVE_PLAYERS: usize = 9;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    Keep,
    Remove,
}

impl std::str::FromStr for OracleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" => Ok(OracleMode::Keep),
            "remove" => Ok(OracleMode::Remove),
            other => Err(Error::InvalidArgument(format!(
                "unknown oracle mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSubsets {
    pub mode: OracleMode,
    pub n_players: usize,
    /// All best coalitions of each size, ascending by bitmask.
    pub per_k: BTreeMap<usize, Vec<Coalition>>,
    /// The optimal `ν` for each size (of the kept set, or of the complement).
    pub best_value: BTreeMap<usize, f64>,
}

impl OracleSubsets {
    /// Oracle sets given directly rather than searched for.
    pub fn from_sets(
        mode: OracleMode,
        n_players: usize,
        per_k: BTreeMap<usize, Vec<Coalition>>,
    ) -> Result<Self> {
        for (&k, sets) in &per_k {
            if k == 0 || k > n_players || sets.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "bad oracle entry for K={k}"
                )));
            }
            if sets
                .iter()
                .any(|s| s.size() != k || s.n_players() != n_players)
            {
                return Err(Error::InvalidArgument(format!(
                    "oracle set of wrong size for K={k}"
                )));
            }
        }
        Ok(Self {
            mode,
            n_players,
            per_k,
            best_value: BTreeMap::new(),
        })
    }

    pub fn k_range(&self) -> Vec<usize> {
        self.per_k.keys().copied().collect()
    }

    fn max_k(&self) -> usize {
        self.per_k.keys().next_back().copied().unwrap_or(0)
    }

    /// Best Jaccard overlap of `selected` with the oracle sets of its size.
    fn best_overlap(&self, selected: Coalition) -> f64 {
        self.per_k.get(&selected.size()).map_or(0.0, |sets| {
            sets.iter()
                .map(|s| jaccard(*s, selected))
                .fold(0.0, f64::max)
        })
    }

    fn weight_total(&self) -> f64 {
        self.per_k.keys().map(|&k| k as f64).sum()
    }
}

/// Exhaustive per-size search for the best kept or removed sets.
pub fn compute_oracle_subsets(
    game: &Game,
    mode: OracleMode,
    k_range: &[usize],
) -> Result<OracleSubsets> {
    let n = game.n_players();
    let mut per_k = BTreeMap::new();
    let mut best_value = BTreeMap::new();
    for &k in k_range {
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "oracle size {k} outside 1..={n}"
            )));
        }
        let required = binomial(n, k);
        if required > ORACLE_BUDGET {
            return Err(Error::Budget {
                what: format!("oracle subsets of size K={k}"),
                required,
                budget: ORACLE_BUDGET,
            });
        }
        let value_of = |s: u64| -> Result<f64> {
            let c = Coalition::from_bits_unchecked(s, n);
            match mode {
                OracleMode::Keep => game.evaluate(c),
                OracleMode::Remove => game.evaluate(c.complement()),
            }
        };

        // Max first, then collect every set within tolerance of it.
        let best = SubsetsOfSize::new(n, k)
            .par_bridge()
            .map(value_of)
            .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))?;
        let tol = TIE_TOL * best.abs().max(1.0);
        let mut sets: Vec<u64> = SubsetsOfSize::new(n, k)
            .par_bridge()
            .map(|s| Ok((s, value_of(s)?)))
            .filter_map(|r: Result<(u64, f64)>| match r {
                Ok((s, v)) if best - v <= tol => Some(Ok(s)),
                Ok(_) => None,
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<_>>()?;
        sets.sort_unstable();
        per_k.insert(
            k,
            sets.into_iter()
                .map(|s| Coalition::from_bits_unchecked(s, n))
                .collect(),
        );
        best_value.insert(k, best);
    }
    Ok(OracleSubsets {
        mode,
        n_players: n,
        per_k,
        best_value,
    })
}

/// `|a ∩ b| / |a ∪ b|`, and 1 for two empty sets.
pub fn jaccard(a: Coalition, b: Coalition) -> f64 {
    let union = (a.bits() | b.bits()).count_ones();
    if union == 0 {
        return 1.0;
    }
    (a.bits() & b.bits()).count_ones() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankScore {
    pub mode: OracleMode,
    pub per_k: BTreeMap<usize, f64>,
    pub weighted_total: f64,
}

/// The order in which a ranking selects players for comparison in `mode`.
pub fn selection_order(rank: &Ranking, mode: OracleMode) -> Vec<usize> {
    match mode {
        OracleMode::Keep => rank.order.clone(),
        OracleMode::Remove => rank.removal_order(),
    }
}

/// The ranking whose selection order in `mode` is `order`.
pub fn ranking_from_selection(order: &[usize], mode: OracleMode) -> Result<Ranking> {
    match mode {
        OracleMode::Keep => Ranking::from_order(order.to_vec()),
        OracleMode::Remove => Ranking::from_order(order.iter().rev().copied().collect()),
    }
}

pub fn score_ranking(rank: &Ranking, oracle: &OracleSubsets) -> Result<RankScore> {
    if rank.n_players() != oracle.n_players {
        return Err(Error::InvalidArgument(format!(
            "ranking over {} players scored against oracle over {}",
            rank.n_players(),
            oracle.n_players
        )));
    }
    score_order(&selection_order(rank, oracle.mode), oracle)
}

/// Scores a selection order directly: its first `K` entries are compared
/// with the oracle sets of size `K`.
pub fn score_order(order: &[usize], oracle: &OracleSubsets) -> Result<RankScore> {
    let n = oracle.n_players;
    if order.len() < oracle.max_k() {
        return Err(Error::InvalidArgument(format!(
            "order of length {} is shorter than the largest oracle size {}",
            order.len(),
            oracle.max_k()
        )));
    }
    let mut bits = 0u64;
    let mut per_k = BTreeMap::new();
    for (pos, &p) in order.iter().enumerate().take(oracle.max_k()) {
        if p >= n || bits >> p & 1 == 1 {
            return Err(Error::InvalidArgument(format!(
                "order {order:?} repeats or exceeds players"
            )));
        }
        bits |= 1 << p;
        if oracle.per_k.contains_key(&(pos + 1)) {
            let j = oracle.best_overlap(Coalition::from_bits_unchecked(bits, n));
            per_k.insert(pos + 1, j);
        }
    }
    let weighted_total =
        per_k.iter().map(|(&k, j)| k as f64 * j).sum::<f64>() / oracle.weight_total();
    Ok(RankScore {
        mode: oracle.mode,
        per_k,
        weighted_total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleConstruction {
    /// Exact search over prefix sets for the order with the highest score.
    #[default]
    Chain,
    /// Each position takes the player that best matches the oracle sets of
    /// that size, given the earlier positions.
    Greedy,
}

impl std::str::FromStr for OracleConstruction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(OracleConstruction::Chain),
            "greedy" => Ok(OracleConstruction::Greedy),
            other => Err(Error::InvalidArgument(format!(
                "unknown construction {other:?}"
            ))),
        }
    }
}

pub fn build_oracle_rank(oracle: &OracleSubsets) -> Result<Ranking> {
    build_oracle_rank_with(oracle, OracleConstruction::Chain)
}

pub fn build_oracle_rank_with(
    oracle: &OracleSubsets,
    construction: OracleConstruction,
) -> Result<Ranking> {
    let order = oracle_order(oracle, construction)?;
    ranking_from_selection(&order, oracle.mode)
}

/// The Oracle rank as a selection order. Positions past the largest oracle
/// size are filled in ascending player index.
pub fn oracle_order(
    oracle: &OracleSubsets,
    construction: OracleConstruction,
) -> Result<Vec<usize>> {
    let prefix = match construction {
        OracleConstruction::Chain => chain_prefix(oracle)?,
        OracleConstruction::Greedy => greedy_prefix(oracle),
    };
    let mut order = prefix.clone();
    order.extend((0..oracle.n_players).filter(|p| !prefix.contains(p)));
    Ok(order)
}

fn gain(oracle: &OracleSubsets, bits: u64) -> f64 {
    let c = Coalition::from_bits_unchecked(bits, oracle.n_players);
    if oracle.per_k.contains_key(&c.size()) {
        c.size() as f64 * oracle.best_overlap(c)
    } else {
        0.0
    }
}

fn greedy_prefix(oracle: &OracleSubsets) -> Vec<usize> {
    let n = oracle.n_players;
    let mut bits = 0u64;
    let mut order = Vec::new();
    for _ in 0..oracle.max_k() {
        let mut best: Option<(usize, f64)> = None;
        for p in (0..n).filter(|p| bits >> p & 1 == 0) {
            let g = gain(oracle, bits | 1 << p);
            if best.is_none_or(|(_, b)| g > b + TIE_TOL) {
                best = Some((p, g));
            }
        }
        let (p, _) = best.expect("max_k ≤ n leaves a candidate");
        bits |= 1 << p;
        order.push(p);
    }
    order
}

/// Value-to-go over prefix sets of size `0..=max_k`; the reconstruction takes
/// the smallest player index among optimal continuations.
fn chain_prefix(oracle: &OracleSubsets) -> Result<Vec<usize>> {
    let n = oracle.n_players;
    let max_k = oracle.max_k();
    let states: u128 = (0..=max_k).map(|k| binomial(n, k)).sum();
    if states > CHAIN_STATE_BUDGET {
        return Err(Error::Budget {
            what: format!("oracle chain search over {n} players up to size {max_k}"),
            required: states,
            budget: CHAIN_STATE_BUDGET,
        });
    }

    let mut to_go: Vec<HashMap<u64, f64>> = vec![HashMap::new(); max_k + 1];
    to_go[max_k] = SubsetsOfSize::new(n, max_k).map(|s| (s, 0.0)).collect();
    for k in (0..max_k).rev() {
        let next = &to_go[k + 1];
        let level: HashMap<u64, f64> = SubsetsOfSize::new(n, k)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|s| {
                let best = (0..n)
                    .filter(|p| s >> p & 1 == 0)
                    .map(|p| {
                        let t = s | 1 << p;
                        gain(oracle, t) + next[&t]
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                (s, best)
            })
            .collect();
        to_go[k] = level;
    }

    let mut bits = 0u64;
    let mut order = Vec::with_capacity(max_k);
    for k in 0..max_k {
        let target = to_go[k][&bits];
        let p = (0..n)
            .filter(|p| bits >> p & 1 == 0)
            .find(|&p| {
                let t = bits | 1 << p;
                gain(oracle, t) + to_go[k + 1][&t] >= target - 1e-9
            })
            .expect("an optimal continuation exists");
        bits |= 1 << p;
        order.push(p);
    }
    Ok(order)
}

/// Best selection order found by scoring all `N!` orders.
pub fn best_order_exhaustive(oracle: &OracleSubsets) -> Result<(Vec<usize>, f64)> {
    let n = oracle.n_players;
    if n > MAX_EXHAUSTIVE_PLAYERS {
        return Err(Error::Capacity {
            method: "exhaustive rank search",
            n,
            max: MAX_EXHAUSTIVE_PLAYERS,
            alternative: "the chain construction",
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut items: Vec<usize> = (0..n).collect();
    let mut failure = None;
    for_each_permutation(&mut items, |order| match score_order(order, oracle) {
        Ok(score) => {
            let better = best.as_ref().is_none_or(|(b, s)| {
                score.weighted_total > s + TIE_TOL
                    || (score.weighted_total > s - TIE_TOL && order < b.as_slice())
            });
            if better {
                best = Some((order.to_vec(), score.weighted_total));
            }
        }
        Err(e) => failure = Some(e),
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(best.unwrap_or((Vec::new(), 1.0)))
}
