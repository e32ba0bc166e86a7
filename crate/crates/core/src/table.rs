//! Explicit payoff tables and the GameSpec JSON format.
//!
//! ```text
//! {"n_players": 3, "values": {"0": 10.0, "1": 55.0, ..., "7": 90.0}}
//! ```
//!
//! Keys are coalition bitmasks written as decimal strings. All `2^N` keys must
//! be present and no others.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Deserialize, Serialize, Serializer};

use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::game::CharacteristicFn;

/// Largest table we are willing to materialize.
pub const MAX_TABLE_PLAYERS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    n_players: usize,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new(n_players: usize, values: Vec<f64>) -> Result<Self> {
        if n_players > MAX_TABLE_PLAYERS {
            return Err(Error::Capacity {
                method: "table game",
                n: n_players,
                max: MAX_TABLE_PLAYERS,
                alternative: "an implicit characteristic function",
            });
        }
        if values.len() != 1usize << n_players {
            return Err(Error::InvalidArgument(format!(
                "table for {n_players} players needs {} values, got {}",
                1usize << n_players,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "value for coalition {pos} is not finite"
            )));
        }
        Ok(Self { n_players, values })
    }

    /// Tabulates an arbitrary function of the coalition.
    pub fn from_fn(n_players: usize, f: impl Fn(Coalition) -> f64) -> Result<Self> {
        if n_players > MAX_TABLE_PLAYERS {
            return Self::new(n_players, Vec::new());
        }
        let values = (0..1u64 << n_players)
            .map(|bits| f(Coalition::from_bits_unchecked(bits, n_players)))
            .collect();
        Self::new(n_players, values)
    }

    /// `ν(K) = c` for every coalition.
    pub fn constant(n_players: usize, c: f64) -> Result<Self> {
        Self::from_fn(n_players, |_| c)
    }

    /// `ν(K) = Σ_{i∈K} w_i`.
    pub fn additive(weights: &[f64]) -> Result<Self> {
        Self::from_fn(weights.len(), |c| c.members().map(|i| weights[i]).sum())
    }

    /// Random game with structure: an additive part `w_i ~ U(0,1)`, pairwise
    /// interactions `U(-0.2, 0.2)` and independent per-coalition noise
    /// `U(-0.25, 0.25)` (zero for the empty coalition).
    pub fn random(n_players: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..n_players).map(|_| rng.random::<f64>()).collect();
        let mut pair = vec![0.0; n_players * n_players];
        for i in 0..n_players {
            for j in i + 1..n_players {
                pair[i * n_players + j] = rng.random_range(-0.2..0.2);
            }
        }
        let noise: Vec<f64> = (0..1u64 << n_players.min(MAX_TABLE_PLAYERS))
            .map(|bits| {
                if bits == 0 {
                    0.0
                } else {
                    rng.random_range(-0.25..0.25)
                }
            })
            .collect();
        Self::from_fn(n_players, |c| {
            let members: Vec<usize> = c.members().collect();
            let mut v: f64 = members.iter().map(|&i| w[i]).sum();
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    v += pair[i * n_players + j];
                }
            }
            v + noise[c.bits() as usize]
        })
    }

    /// The three-node example: the full layer scores 90, the empty layer 10.
    /// Player labels 1, 2, 3 map to indices 0, 1, 2.
    pub fn figure2() -> Self {
        // index = bitmask: ∅, {1}, {2}, {1,2}, {3}, {1,3}, {2,3}, {1,2,3}
        Self::new(3, vec![10.0, 55.0, 40.0, 55.0, 35.0, 70.0, 85.0, 90.0])
            .expect("fixed table is valid")
    }

    /// `a·self + b·other`, pointwise.
    pub fn linear_combination(&self, a: f64, other: &TableGame, b: f64) -> Result<Self> {
        if self.n_players != other.n_players {
            return Err(Error::InvalidArgument(
                "games differ in player count".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.n_players, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, coalition: Coalition) -> f64 {
        self.values[coalition.bits() as usize]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawGameSpec = serde_json::from_str(text)?;
        Self::try_from(raw)
    }
}

/// Shorthand for [`TableGame::figure2`].
pub fn make_figure2_game() -> TableGame {
    TableGame::figure2()
}

impl CharacteristicFn for TableGame {
    fn n_players(&self) -> usize {
        self.n_players
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        Ok(self.values[coalition.bits() as usize])
    }
}

impl Serialize for TableGame {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Values<'a>(&'a [f64]);
        impl Serialize for Values<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.len()))?;
                for (bits, v) in self.0.iter().enumerate() {
                    map.serialize_entry(&bits.to_string(), v)?;
                }
                map.end()
            }
        }
        let mut st = serializer.serialize_struct("GameSpec", 2)?;
        st.serialize_field("n_players", &self.n_players)?;
        st.serialize_field("values", &Values(&self.values))?;
        st.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGameSpec {
    n_players: usize,
    values: HashMap<String, f64>,
}

impl TryFrom<RawGameSpec> for TableGame {
    type Error = Error;

    fn try_from(raw: RawGameSpec) -> Result<Self> {
        let n = raw.n_players;
        if n > MAX_PLAYERS || n > MAX_TABLE_PLAYERS {
            return Err(Error::Parse(format!(
                "n_players = {n} exceeds the table limit of {MAX_TABLE_PLAYERS}"
            )));
        }
        let len = 1usize << n;
        let mut values = vec![None; len];
        for (key, v) in raw.values {
            let bits: usize = key
                .parse()
                .map_err(|_| Error::Parse(format!("key {key:?} is not a decimal bitmask")))?;
            if bits >= len {
                return Err(Error::Parse(format!("extra key {key:?} for {n} players")));
            }
            if key != bits.to_string() {
                return Err(Error::Parse(format!(
                    "key {key:?} is not in canonical decimal form"
                )));
            }
            values[bits] = Some(v);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(bits, v)| v.ok_or_else(|| Error::Parse(format!("missing key \"{bits}\""))))
            .collect::<Result<Vec<_>>>()?;
        TableGame::new(n, values).map_err(|e| Error::Parse(e.to_string()))
    }
}
