//! Shapley values as a kernel-weighted least-squares fit over coalition
//! indicator vectors.
//!
//! Each row is a coalition `K` with target `ν(K)` and weight
//! `k(N, K) = (N−1) / (C(N,|K|)·|K|·(N−|K|))`. Sampled rows are weighted by
//! `k(N, K) / (p(K)·rows)` where `p` is the sampler's probability of drawing
//! `K`, so every sampler estimates the same fully enumerated objective.
//!
//! The intercept `φ₀` is fixed to `ν(∅)` by default and the efficiency
//! constraint `Σ φ_j = ν(N) − ν(∅)` is imposed by eliminating the last player's
//! variable. With the constraint off, the grand coalition enters as an anchor
//! row of weight [`KERNEL_ANCHOR_WEIGHT`] (and the empty coalition as well, when
//! the intercept is fitted).

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{full_mask, Coalition};
use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::estimate::{Method, ShapleyEstimate};
use crate::game::Game;

/// Stand-in for the infinite kernel weight of the empty and grand coalitions.
pub const KERNEL_ANCHOR_WEIGHT: f64 = 1e10;

/// Ridge added when the plain normal equations cannot be factored.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Row cap for [`Sampler::Enumerate`].
pub const MAX_ENUMERATED_PLAYERS: usize = 24;

/// Shapley kernel weight of a size-`k` coalition among `n` players.
pub fn shapley_kernel_weight(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "coalition size {k} outside 0..={n}"
        )));
    }
    if k == 0 || k == n {
        return Ok(KERNEL_ANCHOR_WEIGHT);
    }
    Ok((n - 1) as f64 / (binomial(n, k) as f64 * k as f64 * (n - k) as f64))
}

/// Total kernel weight of all coalitions of size `k`: `(n−1) / (k(n−k))`.
fn kernel_mass(n: usize, k: usize) -> f64 {
    (n - 1) as f64 / (k as f64 * (n - k) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Prefix of a uniform random permutation, prefix length uniform in `1..N`.
    PermutationPrefix,
    /// Each player included independently with probability 1/2.
    BernoulliHalf,
    /// Size drawn proportionally to its kernel mass, then a uniform subset of
    /// that size.
    #[default]
    SizeStratified,
    /// Every proper nonempty coalition once, with exact kernel weights.
    Enumerate,
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::PermutationPrefix => "permutation-prefix",
            Sampler::BernoulliHalf => "bernoulli-half",
            Sampler::SizeStratified => "size-stratified",
            Sampler::Enumerate => "enumerate",
        }
    }
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "permutation-prefix" => Ok(Sampler::PermutationPrefix),
            "bernoulli-half" => Ok(Sampler::BernoulliHalf),
            "size-stratified" => Ok(Sampler::SizeStratified),
            "enumerate" => Ok(Sampler::Enumerate),
            other => Err(Error::InvalidArgument(format!("unknown sampler {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub n_samples: usize,
    pub sampler: Sampler,
    pub seed: u64,
    /// Ridge used only if the unregularized solve fails; 0 disables the fallback.
    pub ridge: f64,
    pub enforce_efficiency: bool,
    pub fit_intercept: bool,
}

impl RegressionConfig {
    pub fn new(n_samples: usize, sampler: Sampler, seed: u64) -> Self {
        Self {
            n_samples,
            sampler,
            seed,
            ridge: DEFAULT_RIDGE,
            enforce_efficiency: true,
            fit_intercept: false,
        }
    }

    /// All proper nonempty coalitions with exact kernel weights.
    pub fn enumerate() -> Self {
        Self::new(0, Sampler::Enumerate, 0)
    }

    pub fn validate(&self, n_players: usize) -> Result<()> {
        if n_players < 2 {
            return Err(Error::InvalidArgument(
                "kernel regression needs at least two players".into(),
            ));
        }
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(Error::InvalidArgument(
                "ridge must be finite and non-negative".into(),
            ));
        }
        if self.sampler == Sampler::Enumerate {
            if n_players > MAX_ENUMERATED_PLAYERS {
                return Err(Error::Capacity {
                    method: "kernel regression enumeration",
                    n: n_players,
                    max: MAX_ENUMERATED_PLAYERS,
                    alternative: "a sampled row set",
                });
            }
        } else if self.n_samples < n_players {
            return Err(Error::InvalidArgument(format!(
                "need at least {n_players} sampled rows, got {}",
                self.n_samples
            )));
        }
        Ok(())
    }
}

/// One regression row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub coalition: Coalition,
    pub value: f64,
    pub weight: f64,
}

impl KernelSample {
    pub fn indicator(&self) -> Vec<f64> {
        self.coalition.indicator()
    }
}

/// Draws the coalitions for `cfg` (without evaluating them), paired with
/// their regression weights.
pub fn sample_coalitions(n: usize, cfg: &RegressionConfig) -> Result<Vec<(Coalition, f64)>> {
    cfg.validate(n)?;
    if cfg.sampler == Sampler::Enumerate {
        return (1..full_mask(n))
            .map(|bits| {
                let c = Coalition::from_bits_unchecked(bits, n);
                Ok((c, shapley_kernel_weight(n, c.size())?))
            })
            .collect();
    }

    let masses: Vec<f64> = (1..n).map(|k| kernel_mass(n, k)).collect();
    let total_mass: f64 = masses.iter().sum();
    let sizes = WeightedIndex::new(&masses).expect("kernel masses are positive");
    let rows = cfg.n_samples as f64;

    Ok((0..cfg.n_samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let bits = match cfg.sampler {
                Sampler::BernoulliHalf => loop {
                    let b = rng.random::<u64>() & full_mask(n);
                    if b != 0 && b != full_mask(n) {
                        break b;
                    }
                },
                Sampler::PermutationPrefix => {
                    let mut perm: Vec<usize> = (0..n).collect();
                    perm.shuffle(&mut rng);
                    let len = rng.random_range(1..n);
                    perm[..len].iter().fold(0u64, |b, &p| b | 1 << p)
                }
                Sampler::SizeStratified => {
                    let k = sizes.sample(&mut rng) + 1;
                    rand::seq::index::sample(&mut rng, n, k)
                        .iter()
                        .fold(0u64, |b, p| b | 1 << p)
                }
                Sampler::Enumerate => unreachable!(),
            };
            let c = Coalition::from_bits_unchecked(bits, n);
            let k = c.size();
            let kernel = shapley_kernel_weight(n, k).expect("proper subset");
            let prob = match cfg.sampler {
                Sampler::BernoulliHalf => 1.0 / (2f64.powi(n as i32) - 2.0),
                Sampler::PermutationPrefix => 1.0 / ((n - 1) as f64 * binomial(n, k) as f64),
                Sampler::SizeStratified => kernel / total_mass,
                Sampler::Enumerate => unreachable!(),
            };
            (c, kernel / (prob * rows))
        })
        .collect())
}

/// Draws and evaluates the regression rows.
pub fn kernel_samples(game: &Game, cfg: &RegressionConfig) -> Result<Vec<KernelSample>> {
    let drawn = sample_coalitions(game.n_players(), cfg)?;
    drawn
        .into_par_iter()
        .map(|(coalition, weight)| {
            Ok(KernelSample {
                coalition,
                value: game.evaluate(coalition)?,
                weight,
            })
        })
        .collect()
}

/// Outcome of a weighted least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSolution {
    pub coefficients: Vec<f64>,
    pub ridge: f64,
    /// Ratio of extreme eigenvalues of the (unregularized) normal matrix.
    pub condition: f64,
}

/// Minimizes `Σ_r w_r (y_r − x_rᵀβ)² + λ‖β‖²` via the normal equations and a
/// Cholesky factorization.
pub fn solve_weighted_least_squares(
    design: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    ridge: f64,
) -> Result<LeastSquaresSolution> {
    let (gram, rhs) = normal_equations(design, targets, weights)?;
    let condition = condition_estimate(&gram);
    solve_normal(gram, rhs, ridge, condition)
}

fn normal_equations(
    design: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if design.len() != targets.len() || design.len() != weights.len() {
        return Err(Error::Shape(
            "design, targets and weights differ in length".into(),
        ));
    }
    let p = design.first().map_or(0, Vec::len);
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for ((x, &y), &w) in design.iter().zip(targets).zip(weights) {
        if x.len() != p {
            return Err(Error::Shape("ragged design matrix".into()));
        }
        for a in 0..p {
            if x[a] == 0.0 {
                continue;
            }
            let wx = w * x[a];
            rhs[a] += wx * y;
            for b in a..p {
                gram[(a, b)] += wx * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    Ok((gram, rhs))
}

fn condition_estimate(gram: &DMatrix<f64>) -> f64 {
    if gram.nrows() == 0 {
        return 1.0;
    }
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn solve_normal(
    mut gram: DMatrix<f64>,
    rhs: DVector<f64>,
    ridge: f64,
    condition: f64,
) -> Result<LeastSquaresSolution> {
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    let chol = gram.cholesky().ok_or(Error::Singular { condition })?;
    let beta = chol.solve(&rhs);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { condition });
    }
    Ok(LeastSquaresSolution {
        coefficients: beta.iter().copied().collect(),
        ridge,
        condition,
    })
}

/// Shapley estimate together with fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub estimate: ShapleyEstimate,
    pub intercept: f64,
    pub condition: f64,
}

pub fn shapley_regression(game: &Game, cfg: &RegressionConfig) -> Result<ShapleyEstimate> {
    shapley_regression_fit(game, cfg).map(|fit| fit.estimate)
}

pub fn shapley_regression_fit(game: &Game, cfg: &RegressionConfig) -> Result<RegressionFit> {
    let samples = kernel_samples(game, cfg)?;
    fit_kernel_samples(game, &samples, cfg)
}

/// Solves the kernel regression over pre-evaluated rows.
pub fn fit_kernel_samples(
    game: &Game,
    samples: &[KernelSample],
    cfg: &RegressionConfig,
) -> Result<RegressionFit> {
    let n = game.n_players();
    cfg.validate(n)?;
    let grand = game.grand_value();
    let empty = game.empty_value();
    let total = grand - empty;
    let last = n - 1;

    let mut design = Vec::with_capacity(samples.len() + 2);
    let mut targets = Vec::with_capacity(samples.len() + 2);
    let mut weights = Vec::with_capacity(samples.len() + 2);

    // Column layout: [φ₀ if fitted] then φ_0..φ_{n−1}, minus φ_{n−1} when eliminated.
    let row = |v: &[f64], value: f64| -> (Vec<f64>, f64) {
        let mut x = Vec::with_capacity(n + 1);
        let v_last = v[last];
        let y = match (cfg.fit_intercept, cfg.enforce_efficiency) {
            (false, true) => {
                x.extend(v[..last].iter().map(|vj| vj - v_last));
                value - empty - v_last * total
            }
            (false, false) => {
                x.extend_from_slice(v);
                value - empty
            }
            (true, true) => {
                x.push(1.0 - v_last);
                x.extend(v[..last].iter().map(|vj| vj - v_last));
                value - v_last * grand
            }
            (true, false) => {
                x.push(1.0);
                x.extend_from_slice(v);
                value
            }
        };
        (x, y)
    };

    for s in samples {
        if s.coalition.is_empty() || s.coalition.size() == n {
            continue;
        }
        let (x, y) = row(&s.indicator(), s.value);
        design.push(x);
        targets.push(y);
        weights.push(s.weight);
    }
    if !cfg.enforce_efficiency {
        let (x, y) = row(&vec![1.0; n], grand);
        design.push(x);
        targets.push(y);
        weights.push(KERNEL_ANCHOR_WEIGHT);
    }
    if cfg.fit_intercept {
        let (x, y) = row(&vec![0.0; n], empty);
        design.push(x);
        targets.push(y);
        weights.push(KERNEL_ANCHOR_WEIGHT);
    }
    if design.is_empty() {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }

    let (gram, rhs) = normal_equations(&design, &targets, &weights)?;
    let condition = condition_estimate(&gram);
    let solution = match solve_normal(gram.clone(), rhs.clone(), 0.0, condition) {
        Ok(sol) => sol,
        Err(e) if cfg.ridge == 0.0 => return Err(e),
        Err(_) => solve_normal(gram, rhs, cfg.ridge, condition)?,
    };

    let beta = &solution.coefficients;
    let (intercept, rest) = if cfg.fit_intercept {
        (beta[0], &beta[1..])
    } else {
        (empty, &beta[..])
    };
    let mut values = rest.to_vec();
    if cfg.enforce_efficiency {
        let target = if cfg.fit_intercept {
            grand - intercept
        } else {
            total
        };
        values.push(target - values.iter().sum::<f64>());
    }

    let mut touched: HashSet<u64> = samples.iter().map(|s| s.coalition.bits()).collect();
    touched.insert(0);
    touched.insert(full_mask(n));

    let estimate = ShapleyEstimate {
        values,
        std_err: None,
        method: Method::Kernel {
            sampler: cfg.sampler.name().to_string(),
            rows: samples.len(),
            enforce_efficiency: cfg.enforce_efficiency,
            fit_intercept: cfg.fit_intercept,
            ridge_used: solution.ridge,
        },
        evals_used: touched.len() as u64,
        seed: (cfg.sampler != Sampler::Enumerate).then_some(cfg.seed),
    }
    .check()?;
    Ok(RegressionFit {
        estimate,
        intercept,
        condition: solution.condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::shapley_exact_subsets;
    use crate::table::TableGame;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn kernel_weight_values() {
        // (n−1) / (C(n,k)·k·(n−k)) evaluated by hand.
        assert!((shapley_kernel_weight(3, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((shapley_kernel_weight(3, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(shapley_kernel_weight(3, 0).unwrap(), 1e10);
        assert_eq!(shapley_kernel_weight(3, 3).unwrap(), 1e10);
        assert!(shapley_kernel_weight(3, 4).is_err());
        for n in 2..20 {
            for k in 1..n {
                let a = shapley_kernel_weight(n, k).unwrap();
                let b = shapley_kernel_weight(n, n - k).unwrap();
                assert!((a - b).abs() <= 1e-15 * a);
            }
        }
    }

    #[test]
    fn three_player_full_enumeration() {
        let game = Game::new(TableGame::figure2()).unwrap();
        let est = shapley_regression(&game, &RegressionConfig::enumerate()).unwrap();
        assert!(
            max_err(&est.values, &[25.0, 25.0, 30.0]) < 1e-6,
            "{:?}",
            est.values
        );
    }

    #[test]
    fn additive_full_enumeration() {
        let w = [0.3, -1.2, 2.0, 0.0, 0.7];
        let game = Game::new(TableGame::additive(&w).unwrap()).unwrap();
        let est = shapley_regression(&game, &RegressionConfig::enumerate()).unwrap();
        assert!(max_err(&est.values, &w) < 1e-6);
    }

    #[test]
    fn anchor_rows_instead_of_constraint() {
        let game = Game::new(TableGame::random(6, 5).unwrap()).unwrap();
        let exact = shapley_exact_subsets(&game).unwrap().values;
        let mut cfg = RegressionConfig::enumerate();
        cfg.enforce_efficiency = false;
        let est = shapley_regression(&game, &cfg).unwrap();
        assert!(
            max_err(&est.values, &exact) < 1e-5,
            "{:?} vs {exact:?}",
            est.values
        );
        cfg.fit_intercept = true;
        let fit = shapley_regression_fit(&game, &cfg).unwrap();
        assert!(max_err(&fit.estimate.values, &exact) < 1e-5);
        assert!((fit.intercept - game.empty_value()).abs() < 1e-5);
        cfg.enforce_efficiency = true;
        let fit = shapley_regression_fit(&game, &cfg).unwrap();
        assert!(max_err(&fit.estimate.values, &exact) < 1e-5);
    }

    #[test]
    fn three_player_bernoulli_500() {
        let game = Game::new(TableGame::figure2()).unwrap();
        let cfg = RegressionConfig::new(500, Sampler::BernoulliHalf, 3);
        let est = shapley_regression(&game, &cfg).unwrap();
        assert!(
            max_err(&est.values, &[25.0, 25.0, 30.0]) <= 1.0,
            "{:?}",
            est.values
        );
    }

    #[test]
    fn efficiency_holds_for_any_budget() {
        let game = Game::new(TableGame::random(7, 1).unwrap()).unwrap();
        for sampler in [
            Sampler::BernoulliHalf,
            Sampler::PermutationPrefix,
            Sampler::SizeStratified,
        ] {
            for rows in [7, 20, 300] {
                let est =
                    shapley_regression(&game, &RegressionConfig::new(rows, sampler, 4)).unwrap();
                assert!((est.sum() - game.target_quantity()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn singular_without_ridge() {
        // Every row is the same coalition: rank one.
        let game = Game::new(TableGame::random(4, 0).unwrap()).unwrap();
        let c = Coalition::from_players([0], 4).unwrap();
        let rows = vec![
            KernelSample {
                coalition: c,
                value: game.evaluate(c).unwrap(),
                weight: 1.0
            };
            4
        ];
        let mut cfg = RegressionConfig::new(4, Sampler::SizeStratified, 0);
        cfg.ridge = 0.0;
        match fit_kernel_samples(&game, &rows, &cfg) {
            Err(Error::Singular { condition }) => assert!(condition > 1e12),
            other => panic!("expected singular error, got {other:?}"),
        }
        cfg.ridge = 1e-8;
        let fit = fit_kernel_samples(&game, &rows, &cfg).unwrap();
        match fit.estimate.method {
            Method::Kernel { ridge_used, .. } => assert_eq!(ridge_used, 1e-8),
            ref m => panic!("{m:?}"),
        }
    }

    #[test]
    fn rejects_small_budgets_and_tiny_games() {
        let game = Game::new(TableGame::random(5, 0).unwrap()).unwrap();
        assert!(
            shapley_regression(&game, &RegressionConfig::new(4, Sampler::BernoulliHalf, 0))
                .is_err()
        );
        let one = Game::new(TableGame::new(1, vec![0.0, 1.0]).unwrap()).unwrap();
        assert!(shapley_regression(&one, &RegressionConfig::enumerate()).is_err());
    }

    #[test]
    fn sampled_rows_are_proper_and_seeded() {
        for sampler in [
            Sampler::BernoulliHalf,
            Sampler::PermutationPrefix,
            Sampler::SizeStratified,
        ] {
            let cfg = RegressionConfig::new(200, sampler, 8);
            let a = sample_coalitions(6, &cfg).unwrap();
            assert_eq!(a, sample_coalitions(6, &cfg).unwrap());
            assert!(a
                .iter()
                .all(|(c, w)| !c.is_empty() && c.size() < 6 && *w > 0.0));
        }
    }

    #[test]
    fn size_stratified_weights_are_constant() {
        let rows =
            sample_coalitions(8, &RegressionConfig::new(100, Sampler::SizeStratified, 1)).unwrap();
        let w0 = rows[0].1;
        assert!(rows.iter().all(|(_, w)| (w - w0).abs() < 1e-12 * w0));
    }
}
