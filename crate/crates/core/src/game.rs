//! Characteristic functions and the memoizing [`Game`] wrapper shared by all estimators.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::coalition::{full_mask, Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};

/// Maps a coalition to a real payoff. Implementations must be safe to call
/// from several threads at once.
pub trait CharacteristicFn: Send + Sync {
    fn n_players(&self) -> usize;

    fn value(&self, coalition: Coalition) -> Result<f64>;
}

impl<F: CharacteristicFn + ?Sized> CharacteristicFn for Arc<F> {
    fn n_players(&self) -> usize {
        (**self).n_players()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        (**self).value(coalition)
    }
}

/// Adapter turning a closure over bitmasks into a characteristic function.
pub struct FnGame<F> {
    n_players: usize,
    f: F,
}

impl<F> FnGame<F>
where
    F: Fn(Coalition) -> f64 + Send + Sync,
{
    pub fn new(n_players: usize, f: F) -> Self {
        Self { n_players, f }
    }
}

impl<F> CharacteristicFn for FnGame<F>
where
    F: Fn(Coalition) -> f64 + Send + Sync,
{
    fn n_players(&self) -> usize {
        self.n_players
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        Ok((self.f)(coalition))
    }
}

type Outcome = std::result::Result<f64, String>;

enum Slot {
    Ready(f64),
    /// Someone is evaluating this coalition right now.
    Pending(Arc<OnceLock<Outcome>>),
}

const SHARDS: usize = 64;

/// Read-or-compute cache: each coalition is evaluated at most once, even
/// when requested concurrently.
struct ValueCache {
    shards: Vec<Mutex<HashMap<u64, Slot>>>,
}

impl ValueCache {
    fn new() -> Self {
        Self {
            shards: (0..SHARDS).map(|_| Mutex::new(HashMap::new())).collect(),
        }
    }

    #[inline]
    fn shard(&self, bits: u64) -> &Mutex<HashMap<u64, Slot>> {
        // Fibonacci hashing; low bits alone cluster badly for small games.
        let h = bits.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 58;
        &self.shards[h as usize % SHARDS]
    }
}

/// A coalitional game `(N, ν)` with memoized evaluations.
///
/// `ν(N)` and `ν(∅)` are evaluated (or taken from preloaded entries) at
/// construction.
pub struct Game {
    n_players: usize,
    char_fn: Arc<dyn CharacteristicFn>,
    cache: ValueCache,
    evals: AtomicU64,
    hits: AtomicU64,
    grand_value: f64,
    empty_value: f64,
}

impl std::fmt::Debug for Game {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Game")
            .field("n_players", &self.n_players)
            .field("evals", &self.eval_count())
            .field("grand_value", &self.grand_value)
            .field("empty_value", &self.empty_value)
            .finish()
    }
}

impl Game {
    pub fn new<F: CharacteristicFn + 'static>(char_fn: F) -> Result<Self> {
        Self::with_cache(Arc::new(char_fn), std::iter::empty())
    }

    /// Builds a game whose cache is seeded with previously computed values.
    /// Seeded entries never count as evaluations.
    pub fn with_cache<I>(char_fn: Arc<dyn CharacteristicFn>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        let n_players = char_fn.n_players();
        if n_players > MAX_PLAYERS {
            return Err(Error::Capacity {
                method: "game",
                n: n_players,
                max: MAX_PLAYERS,
                alternative: "a smaller layer",
            });
        }
        let cache = ValueCache::new();
        for (bits, value) in entries {
            if bits & !full_mask(n_players) != 0 {
                return Err(Error::InvalidArgument(format!(
                    "cached coalition {bits:#x} does not fit {n_players} players"
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "cached value for {bits:#x} is not finite"
                )));
            }
            cache
                .shard(bits)
                .lock()
                .unwrap()
                .insert(bits, Slot::Ready(value));
        }
        let mut game = Self {
            n_players,
            char_fn,
            cache,
            evals: AtomicU64::new(0),
            hits: AtomicU64::new(0),
            grand_value: 0.0,
            empty_value: 0.0,
        };
        game.grand_value = game.evaluate(Coalition::grand(n_players))?;
        game.empty_value = game.evaluate(Coalition::empty(n_players))?;
        Ok(game)
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    /// `ν(coalition)`, computed at most once per coalition.
    pub fn evaluate(&self, coalition: Coalition) -> Result<f64> {
        if coalition.n_players() != self.n_players {
            return Err(Error::InvalidArgument(format!(
                "coalition over {} players passed to a {}-player game",
                coalition.n_players(),
                self.n_players
            )));
        }
        let bits = coalition.bits();
        let shard = self.cache.shard(bits);
        let (cell, owner) = {
            let mut map = shard.lock().unwrap();
            match map.get(&bits) {
                Some(Slot::Ready(v)) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(*v);
                }
                Some(Slot::Pending(cell)) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    (Arc::clone(cell), false)
                }
                None => {
                    let cell = Arc::new(OnceLock::new());
                    map.insert(bits, Slot::Pending(Arc::clone(&cell)));
                    (cell, true)
                }
            }
        };

        let outcome = if owner {
            let outcome = match self.char_fn.value(coalition) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(format!("characteristic function returned {v}")),
                Err(e) => Err(e.to_string()),
            };
            self.evals.fetch_add(1, Ordering::Relaxed);
            let _ = cell.set(outcome.clone());
            let mut map = shard.lock().unwrap();
            match &outcome {
                Ok(v) => {
                    map.insert(bits, Slot::Ready(*v));
                }
                Err(_) => {
                    map.remove(&bits);
                }
            }
            outcome
        } else {
            cell.wait().clone()
        };
        outcome.map_err(|message| Error::Evaluation {
            coalition: bits,
            message,
        })
    }

    pub(crate) fn evaluate_bits(&self, bits: u64) -> Result<f64> {
        self.evaluate(Coalition::from_bits_unchecked(bits, self.n_players))
    }

    /// `ν(N)`.
    pub fn grand_value(&self) -> f64 {
        self.grand_value
    }

    /// `ν(∅)`.
    pub fn empty_value(&self) -> f64 {
        self.empty_value
    }

    /// `ν(N) − ν(∅)`, the quantity Shapley values distribute. May be negative.
    pub fn target_quantity(&self) -> f64 {
        self.grand_value - self.empty_value
    }

    /// Distinct characteristic-function evaluations performed so far.
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Lookups answered from the cache.
    pub fn hit_count(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    /// Every cached `(bitmask, value)` pair, sorted by bitmask.
    pub fn cached_values(&self) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = self
            .cache
            .shards
            .iter()
            .flat_map(|s| {
                s.lock()
                    .unwrap()
                    .iter()
                    .filter_map(|(k, slot)| match slot {
                        Slot::Ready(v) => Some((*k, *v)),
                        Slot::Pending(_) => None,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        out.sort_unstable_by_key(|(k, _)| *k);
        out
    }

    /// Evaluates all `2^N` coalitions into a table indexed by bitmask.
    pub(crate) fn dense_values(
        &self,
        max_players: usize,
        method: &'static str,
    ) -> Result<Vec<f64>> {
        if self.n_players > max_players {
            return Err(Error::Capacity {
                method,
                n: self.n_players,
                max: max_players,
                alternative: "permutation sampling or kernel regression",
            });
        }
        (0..1u64 << self.n_players)
            .into_par_iter()
            .map(|bits| self.evaluate_bits(bits))
            .collect()
    }
}
