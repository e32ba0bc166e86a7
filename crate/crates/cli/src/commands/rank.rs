use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use shaprank::{Method, Ranking, ShapleyEstimate};

use crate::error::CliResult;
use crate::method::{EstimatorArgs, MethodName, MethodParams};
use crate::report::{emit, write_csv, Context, ToolInfo};
use crate::source::{CacheStats, LoadedGame, Provenance, SourceArgs};

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Estimator
    #[arg(long, value_enum, default_value = "exact")]
    pub method: MethodName,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Report path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a per-player CSV table
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct RankReport {
    pub tool: ToolInfo,
    pub provenance: Provenance,
    pub params: MethodParams,
    pub n_players: usize,
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<Vec<f64>>,
    pub method: Method,
    pub seed: Option<u64>,
    pub evals_used: u64,
    pub grand_value: f64,
    pub empty_value: f64,
    pub cache: CacheStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

/// Ranks players of an already loaded game.
pub fn rank_loaded(
    loaded: &LoadedGame,
    method: MethodName,
    estimator: &EstimatorArgs,
) -> CliResult<(MethodParams, ShapleyEstimate, Ranking)> {
    let params = estimator.params(method, loaded.n_players());
    let estimate = params.estimate(&loaded.game)?;
    let ranking = estimate.ranking();
    Ok((params, estimate, ranking))
}

pub fn run(args: &RankArgs, ctx: &Context) -> CliResult<()> {
    let loaded = args.source.load()?;
    let (params, estimate, ranking) = rank_loaded(&loaded, args.method, &args.estimator)?;
    loaded.save_cache()?;

    if let Some(path) = &args.csv {
        let position: Vec<usize> = {
            let mut p = vec![0; ranking.order.len()];
            for (pos, &player) in ranking.order.iter().enumerate() {
                p[player] = pos;
            }
            p
        };
        let rows: Vec<Vec<String>> = (0..estimate.values.len())
            .map(|i| {
                vec![
                    i.to_string(),
                    estimate.values[i].to_string(),
                    estimate
                        .std_err
                        .as_ref()
                        .map_or(String::new(), |s| s[i].to_string()),
                    position[i].to_string(),
                ]
            })
            .collect();
        write_csv(path, &["player", "value", "std_err", "position"], &rows)?;
    }

    let report = RankReport {
        tool: ToolInfo::new("rank"),
        provenance: loaded.provenance.clone(),
        params,
        n_players: loaded.n_players(),
        order: ranking.order,
        scores: ranking.scores,
        std_err: estimate.std_err,
        method: estimate.method,
        seed: estimate.seed,
        evals_used: estimate.evals_used,
        grand_value: loaded.game.grand_value(),
        empty_value: loaded.game.empty_value(),
        cache: loaded.cache_stats(),
        wall_time: ctx.wall_time(),
    };
    emit(&report, args.out.as_deref())
}
