use clap::{Args, ValueEnum};
use serde::Serialize;
use shaprank::partial::{shapley_partial_weighted, BandWeighting};
use shaprank::regression::{shapley_regression, RegressionConfig, Sampler};
use shaprank::sampling::{shapley_sample_permutations, EarlyStop, SamplingConfig};
use shaprank::{
    shapley_exact_permutations, shapley_exact_subsets, Game, ShapleyEstimate, SizeBand,
};

use crate::error::{CliError, CliResult};

/// Kernel rows per player when `--samples` is not given.
const DEFAULT_ROWS_PER_PLAYER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    /// Weighted sum over all coalitions
    Exact,
    /// Average over all N! orderings
    ExactPerm,
    /// Size-banded approximation (leave-one-out with --high-d 1)
    Partial,
    /// Monte Carlo permutation sampling
    Perm,
    /// Kernel-weighted regression
    Kernel,
}

impl MethodName {
    pub fn label(self) -> &'static str {
        match self {
            MethodName::Exact => "exact",
            MethodName::ExactPerm => "exact-perm",
            MethodName::Partial => "partial",
            MethodName::Perm => "perm",
            MethodName::Kernel => "kernel",
        }
    }
}

/// Parameters shared by every estimator; each method reads only its own.
#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Largest "players removed" distance included by --method partial
    #[arg(long, default_value_t = 1)]
    pub high_d: usize,
    /// Number of smallest coalition sizes included by --method partial
    #[arg(long, default_value_t = 0)]
    pub low_d: usize,
    /// Use unnormalized band weights for --method partial
    #[arg(long)]
    pub raw_band: bool,
    /// Permutations for --method perm
    #[arg(long, default_value_t = 1000)]
    pub perms: usize,
    /// Pair each permutation with its reverse
    #[arg(long)]
    pub antithetic: bool,
    /// Early-stopping window in permutations
    #[arg(long, requires = "early_stop_eps")]
    pub early_stop_window: Option<usize>,
    /// Early-stopping tolerance on the running means
    #[arg(long, requires = "early_stop_window")]
    pub early_stop_eps: Option<f64>,
    /// Regression rows for --method kernel (default 10 per player)
    #[arg(long)]
    pub samples: Option<usize>,
    /// Coalition sampler for --method kernel
    #[arg(long, default_value = "size-stratified", value_parser = parse_sampler)]
    pub sampler: Sampler,
    /// Ridge used only when the unregularized solve fails
    #[arg(long, default_value_t = shaprank::regression::DEFAULT_RIDGE)]
    pub ridge: f64,
    /// Drop the efficiency constraint from the regression
    #[arg(long)]
    pub no_efficiency: bool,
    /// Fit the intercept instead of fixing it to ν(∅)
    #[arg(long)]
    pub fit_intercept: bool,
    /// Seed for stochastic methods
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_sampler(s: &str) -> Result<Sampler, String> {
    s.parse::<Sampler>().map_err(|e| e.to_string())
}

/// Method parameters echoed into reports.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodParams {
    Exact,
    ExactPerm,
    Partial {
        high_d: usize,
        low_d: usize,
        weighting: BandWeighting,
    },
    Perm {
        perms: usize,
        antithetic: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        early_stop: Option<EarlyStop>,
        seed: u64,
    },
    Kernel {
        samples: usize,
        sampler: Sampler,
        ridge: f64,
        enforce_efficiency: bool,
        fit_intercept: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl EstimatorArgs {
    pub fn params(&self, method: MethodName, n_players: usize) -> MethodParams {
        match method {
            MethodName::Exact => MethodParams::Exact,
            MethodName::ExactPerm => MethodParams::ExactPerm,
            MethodName::Partial => MethodParams::Partial {
                high_d: self.high_d,
                low_d: self.low_d,
                weighting: if self.raw_band {
                    BandWeighting::Raw
                } else {
                    BandWeighting::Normalized
                },
            },
            MethodName::Perm => MethodParams::Perm {
                perms: self.perms,
                antithetic: self.antithetic,
                early_stop: self
                    .early_stop_window
                    .zip(self.early_stop_eps)
                    .map(|(window, epsilon)| EarlyStop { window, epsilon }),
                seed: self.seed,
            },
            MethodName::Kernel => MethodParams::Kernel {
                samples: self.samples.unwrap_or(DEFAULT_ROWS_PER_PLAYER * n_players),
                sampler: self.sampler,
                ridge: self.ridge,
                enforce_efficiency: !self.no_efficiency,
                fit_intercept: self.fit_intercept,
                seed: (self.sampler != Sampler::Enumerate).then_some(self.seed),
            },
        }
    }
}

impl MethodParams {
    pub fn estimate(&self, game: &Game) -> CliResult<ShapleyEstimate> {
        Ok(match self {
            MethodParams::Exact => shapley_exact_subsets(game)?,
            MethodParams::ExactPerm => shapley_exact_permutations(game)?,
            MethodParams::Partial {
                high_d,
                low_d,
                weighting,
            } => shapley_partial_weighted(game, SizeBand::new(*high_d, *low_d), *weighting)?,
            MethodParams::Perm {
                perms,
                antithetic,
                early_stop,
                seed,
            } => {
                let cfg = SamplingConfig {
                    n_permutations: *perms,
                    seed: *seed,
                    early_stop: *early_stop,
                    antithetic: *antithetic,
                };
                shapley_sample_permutations(game, &cfg)?
            }
            MethodParams::Kernel {
                samples,
                sampler,
                ridge,
                enforce_efficiency,
                fit_intercept,
                seed,
            } => {
                if !ridge.is_finite() || *ridge < 0.0 {
                    return Err(CliError::Usage(
                        "--ridge must be a finite non-negative number".into(),
                    ));
                }
                let mut cfg = RegressionConfig::new(*samples, *sampler, seed.unwrap_or(0));
                cfg.ridge = *ridge;
                cfg.enforce_efficiency = *enforce_efficiency;
                cfg.fit_intercept = *fit_intercept;
                shapley_regression(game, &cfg)?
            }
        })
    }
}
