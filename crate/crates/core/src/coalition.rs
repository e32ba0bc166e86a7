//! Coalitions as bitmasks over at most 64 players.

use std::fmt;

use crate::error::{Error, Result};

pub const MAX_PLAYERS: usize = 64;

/// Mask with the low `n` bits set.
#[inline]
pub fn full_mask(n: usize) -> u64 {
    debug_assert!(n <= MAX_PLAYERS);
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A subset of the players `0..n_players`; bit `i` set means player `i` is in.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    bits: u64,
    n_players: u8,
}

impl Coalition {
    pub fn new(bits: u64, n_players: usize) -> Result<Self> {
        if n_players > MAX_PLAYERS {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_PLAYERS} players supported, got {n_players}"
            )));
        }
        if bits & !full_mask(n_players) != 0 {
            return Err(Error::InvalidArgument(format!(
                "bitmask {bits:#x} has bits outside the {n_players} players"
            )));
        }
        Ok(Self {
            bits,
            n_players: n_players as u8,
        })
    }

    /// Caller guarantees `bits` fits in `n_players`.
    #[inline]
    pub(crate) fn from_bits_unchecked(bits: u64, n_players: usize) -> Self {
        debug_assert!(bits & !full_mask(n_players) == 0);
        Self {
            bits,
            n_players: n_players as u8,
        }
    }

    pub fn empty(n_players: usize) -> Self {
        Self::from_bits_unchecked(0, n_players)
    }

    pub fn grand(n_players: usize) -> Self {
        Self::from_bits_unchecked(full_mask(n_players), n_players)
    }

    pub fn from_players<I: IntoIterator<Item = usize>>(
        players: I,
        n_players: usize,
    ) -> Result<Self> {
        let mut bits = 0u64;
        for p in players {
            if p >= n_players {
                return Err(Error::InvalidArgument(format!(
                    "player {p} out of range for {n_players} players"
                )));
            }
            bits |= 1 << p;
        }
        Self::new(bits, n_players)
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn n_players(&self) -> usize {
        self.n_players as usize
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn contains(&self, player: usize) -> bool {
        player < self.n_players() && self.bits >> player & 1 == 1
    }

    #[inline]
    pub fn with(&self, player: usize) -> Self {
        debug_assert!(player < self.n_players());
        Self::from_bits_unchecked(self.bits | 1 << player, self.n_players())
    }

    #[inline]
    pub fn without(&self, player: usize) -> Self {
        debug_assert!(player < self.n_players());
        Self::from_bits_unchecked(self.bits & !(1 << player), self.n_players())
    }

    #[inline]
    pub fn complement(&self) -> Self {
        Self::from_bits_unchecked(!self.bits & full_mask(self.n_players()), self.n_players())
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self::from_bits_unchecked(self.bits & other.bits, self.n_players())
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_bits_unchecked(self.bits | other.bits, self.n_players())
    }

    /// Members in ascending order.
    pub fn members(&self) -> Members {
        Members { rest: self.bits }
    }

    /// Indicator vector, `1.0` for members.
    pub fn indicator(&self) -> Vec<f64> {
        (0..self.n_players())
            .map(|i| if self.contains(i) { 1.0 } else { 0.0 })
            .collect()
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

pub struct Members {
    rest: u64,
}

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.rest == 0 {
            return None;
        }
        let i = self.rest.trailing_zeros() as usize;
        self.rest &= self.rest - 1;
        Some(i)
    }
}

/// All `k`-subsets of `n` bits in increasing numeric order (Gosper's hack).
pub struct SubsetsOfSize {
    next: Option<u128>,
    limit: u128,
}

impl SubsetsOfSize {
    pub fn new(n: usize, k: usize) -> Self {
        assert!(n <= MAX_PLAYERS && k <= n);
        Self {
            next: Some(full_mask(k) as u128),
            limit: 1u128 << n,
        }
    }
}

impl Iterator for SubsetsOfSize {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let current = self.next?;
        self.next = if current == 0 {
            None
        } else {
            let low = current & current.wrapping_neg();
            let ripple = current + low;
            let candidate = ripple | (((current ^ ripple) >> 2) / low);
            (candidate < self.limit).then_some(candidate)
        };
        Some(current as u64)
    }
}
