use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use serde::Serialize;
use shaprank::toynet::{accuracy, save_model_flat, save_model_json};
use shaprank::{Coalition, Method};

use crate::commands::rank::rank_loaded;
use crate::error::{CliError, CliResult};
use crate::method::{EstimatorArgs, MethodName, MethodParams};
use crate::report::{emit, write_csv, Context, ToolInfo};
use crate::source::{sha256_hex, CacheStats, Provenance, SourceArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RemoveWhich {
    /// Lowest-ranked players
    Least,
    /// Highest-ranked players
    Most,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("amount").required(true).args(["count", "fraction"])))]
pub struct PruneArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Estimator used for the ranking
    #[arg(long, value_enum, default_value = "exact")]
    pub method: MethodName,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Number of units to mask in the layer
    #[arg(long)]
    pub count: Option<usize>,
    /// Fraction of units to mask, rounded to the nearest count
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Which end of the ranking is masked
    #[arg(long, value_enum, default_value = "least")]
    pub remove: RemoveWhich,
    /// Path of the masked model
    #[arg(long)]
    pub out: PathBuf,
    /// Write the masked model in the flat binary format instead of JSON
    #[arg(long)]
    pub flat: bool,
    /// Summary path (stdout when omitted)
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write a per-player CSV table
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct PruneReport {
    pub tool: ToolInfo,
    pub provenance: Provenance,
    pub params: MethodParams,
    pub method: Method,
    pub seed: Option<u64>,
    pub evals_used: u64,
    pub remove: RemoveWhich,
    pub count: usize,
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    pub removed: Vec<usize>,
    pub kept: Vec<usize>,
    pub nu_before: f64,
    pub nu_after: f64,
    pub output: String,
    pub output_sha256: String,
    pub cache: CacheStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

fn resolve_count(args: &PruneArgs, n: usize) -> CliResult<usize> {
    let count = match (args.count, args.fraction) {
        (Some(c), None) => c,
        (None, Some(f)) if f.is_finite() && (0.0..=1.0).contains(&f) => {
            (f * n as f64).round() as usize
        }
        (None, Some(f)) => {
            return Err(CliError::Usage(format!(
                "--fraction {f} must lie in [0, 1]"
            )))
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --count and --fraction".into(),
            ))
        }
    };
    if count == 0 || count >= n {
        return Err(CliError::Usage(format!(
            "prune count {count} must satisfy 0 < count < {n}"
        )));
    }
    Ok(count)
}

pub fn run(args: &PruneArgs, ctx: &Context) -> CliResult<()> {
    if !args.source.has_model() {
        return Err(CliError::Usage("prune needs --model and data".into()));
    }
    let loaded = args.source.load()?;
    let n = loaded.n_players();
    let count = resolve_count(args, n)?;
    let (params, estimate, ranking) = rank_loaded(&loaded, args.method, &args.estimator)?;

    let removed_set = match args.remove {
        RemoveWhich::Least => ranking.bottom(count),
        RemoveWhich::Most => ranking.top(count),
    };
    let kept_set: Coalition = removed_set.complement();
    let (spec, val) = loaded.model.as_ref().expect("model source");
    let masked = spec.with_mask(kept_set)?;
    let nu_before = loaded.game.grand_value();
    let nu_after = accuracy(&masked, val)?;

    if args.flat {
        save_model_flat(&args.out, &masked)?;
    } else {
        save_model_json(&args.out, &masked)?;
    }
    let written = std::fs::read(&args.out)?;
    loaded.save_cache()?;

    if let Some(path) = &args.csv {
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| {
                vec![
                    i.to_string(),
                    estimate.values[i].to_string(),
                    removed_set.contains(i).to_string(),
                ]
            })
            .collect();
        write_csv(path, &["player", "value", "removed"], &rows)?;
    }

    let report = PruneReport {
        tool: ToolInfo::new("prune"),
        provenance: loaded.provenance.clone(),
        params,
        method: estimate.method,
        seed: estimate.seed,
        evals_used: estimate.evals_used,
        remove: args.remove,
        count,
        order: ranking.order,
        scores: ranking.scores,
        removed: removed_set.members().collect(),
        kept: kept_set.members().collect(),
        nu_before,
        nu_after,
        output: args.out.display().to_string(),
        output_sha256: sha256_hex(&written),
        cache: loaded.cache_stats(),
        wall_time: ctx.wall_time(),
    };
    emit(&report, args.report.as_deref())
}
