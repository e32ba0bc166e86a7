//! Shapley values for ranking the units of a neural-network layer.
//!
//! A layer's units are the players of a coalitional game whose payoff is the
//! accuracy of the network with only the coalition's units active. The crate
//! provides exact enumeration, size-band partial sums, permutation sampling
//! and kernel regression estimators, plus an oracle benchmark for rankings.

pub mod coalition;
pub mod combinatorics;
pub mod error;
pub mod estimate;
pub mod exact;
pub mod game;
pub mod oracle;
pub mod partial;
pub mod regression;
pub mod sampling;
pub mod table;
pub mod toynet;

pub use coalition::{Coalition, SubsetsOfSize, MAX_PLAYERS};
pub use error::{Error, Result};
pub use estimate::{Method, Ranking, ShapleyEstimate};
pub use exact::{shapley_exact_permutations, shapley_exact_subsets};
pub use game::{CharacteristicFn, FnGame, Game};
pub use oracle::{
    build_oracle_rank, compute_oracle_subsets, jaccard, score_ranking, OracleMode, OracleSubsets,
    RankScore,
};
pub use partial::{leave_one_out, shapley_partial, SizeBand};
pub use regression::{shapley_regression, RegressionConfig, Sampler};
pub use sampling::{shapley_sample_permutations, SamplingConfig};
pub use table::{make_figure2_game, TableGame};
