use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use shaprank::oracle::{
    build_oracle_rank_with, compute_oracle_subsets, score_ranking, selection_order,
    OracleConstruction, OracleMode, RankScore,
};
use shaprank::Ranking;

use crate::error::{CliError, CliResult};
use crate::method::{EstimatorArgs, MethodName, MethodParams};
use crate::report::{emit, write_csv, Context, ToolInfo};
use crate::source::{sha256_hex, CacheStats, InputFile, Provenance, SourceArgs};

/// Largest size included when `--k-range` is not given.
const DEFAULT_MAX_K: usize = 5;
const DOMINANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Compare best kept sets (keep) or best removed sets (remove)
    #[arg(long, default_value = "remove", value_parser = parse_mode)]
    pub mode: OracleMode,
    /// Sizes K: "1..5", "2-4" or "1,3,5" (default 1..min(N,5))
    #[arg(long)]
    pub k_range: Option<String>,
    /// Rank reports to score
    #[arg(long, num_args = 1..)]
    pub score: Vec<PathBuf>,
    /// Estimators to run and score, comma separated
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<MethodName>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// How the Oracle rank is built
    #[arg(long, default_value = "chain", value_parser = parse_construction)]
    pub construction: OracleConstruction,
    /// Report path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the score table as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<OracleMode, String> {
    s.parse::<OracleMode>().map_err(|e| e.to_string())
}

fn parse_construction(s: &str) -> Result<OracleConstruction, String> {
    s.parse::<OracleConstruction>().map_err(|e| e.to_string())
}

pub fn parse_k_range(text: &str, n_players: usize) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("--k-range {text:?}: expected a..b, a-b or a,b,c"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let mut ks: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once('-') {
        (num(a)?..=num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<CliResult<_>>()?
    };
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 || ks[ks.len() - 1] > n_players {
        return Err(CliError::Usage(format!(
            "--k-range {text:?}: sizes must lie in 1..={n_players}"
        )));
    }
    Ok(ks)
}

/// The fields of a rank report needed for scoring.
#[derive(Deserialize)]
struct RankFile {
    order: Vec<usize>,
    scores: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct OracleSets {
    /// Every optimal set of each size, as 0-based player lists.
    pub per_k: BTreeMap<usize, Vec<Vec<usize>>>,
    pub best_value: BTreeMap<usize, f64>,
}

#[derive(Debug, Serialize)]
pub struct OracleRankInfo {
    pub construction: OracleConstruction,
    /// Rank order, most important first.
    pub order: Vec<usize>,
    /// The order in which players are compared with the oracle sets.
    pub selection: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_weighted_total: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_gap: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ScoreRow {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<MethodParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evals_used: Option<u64>,
    pub order: Vec<usize>,
    pub per_k: BTreeMap<usize, f64>,
    pub weighted_total: f64,
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub tool: ToolInfo,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub scored_files: BTreeMap<String, InputFile>,
    pub mode: OracleMode,
    pub k_range: Vec<usize>,
    pub oracle: OracleSets,
    pub oracle_rank: OracleRankInfo,
    /// One row per scored ranking, then the Oracle rank.
    pub table: Vec<ScoreRow>,
    pub dominance_holds: bool,
    pub cache: CacheStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

fn row(
    label: String,
    rank: &Ranking,
    score: RankScore,
    params: Option<MethodParams>,
    evals: Option<u64>,
) -> ScoreRow {
    ScoreRow {
        label,
        params,
        evals_used: evals,
        order: rank.order.clone(),
        per_k: score.per_k,
        weighted_total: score.weighted_total,
    }
}

pub fn run(args: &OracleArgs, ctx: &Context) -> CliResult<()> {
    let loaded = args.source.load()?;
    let n = loaded.n_players();
    let ks = match &args.k_range {
        Some(text) => parse_k_range(text, n)?,
        None => (1..=n.min(DEFAULT_MAX_K)).collect(),
    };
    let oracle = compute_oracle_subsets(&loaded.game, args.mode, &ks)?;

    let mut table = Vec::new();
    let mut scored_files = BTreeMap::new();
    for path in &args.score {
        let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let label = path.display().to_string();
        scored_files.insert(
            label.clone(),
            InputFile {
                path: label.clone(),
                sha256: sha256_hex(&bytes),
            },
        );
        let file: RankFile = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Io(format!("{}: not a rank report: {e}", path.display())))?;
        let rank = Ranking {
            order: file.order,
            scores: file.scores,
        };
        rank.validate()?;
        let score = score_ranking(&rank, &oracle)?;
        table.push(row(label, &rank, score, None, None));
    }
    for &method in &args.methods {
        let params = args.estimator.params(method, n);
        let estimate = params.estimate(&loaded.game)?;
        let rank = estimate.ranking();
        let score = score_ranking(&rank, &oracle)?;
        table.push(row(
            method.label().into(),
            &rank,
            score,
            Some(params),
            Some(estimate.evals_used),
        ));
    }

    let oracle_rank = build_oracle_rank_with(&oracle, args.construction)?;
    let oracle_score = score_ranking(&oracle_rank, &oracle)?;
    let (greedy_total, greedy_gap) = match args.construction {
        OracleConstruction::Chain => {
            let greedy = build_oracle_rank_with(&oracle, OracleConstruction::Greedy)?;
            let total = score_ranking(&greedy, &oracle)?.weighted_total;
            (Some(total), Some(oracle_score.weighted_total - total))
        }
        OracleConstruction::Greedy => (None, None),
    };
    let dominance_holds = table
        .iter()
        .all(|r| oracle_score.weighted_total >= r.weighted_total - DOMINANCE_TOL);
    let info = OracleRankInfo {
        construction: args.construction,
        order: oracle_rank.order.clone(),
        selection: selection_order(&oracle_rank, args.mode),
        greedy_weighted_total: greedy_total,
        greedy_gap,
    };
    table.push(row("oracle".into(), &oracle_rank, oracle_score, None, None));
    loaded.save_cache()?;

    if let Some(path) = &args.csv {
        let mut header = vec!["ranking".to_string()];
        header.extend(ks.iter().map(|k| format!("K={k}")));
        header.push("weighted_total".into());
        let rows: Vec<Vec<String>> = table
            .iter()
            .map(|r| {
                let mut cells = vec![r.label.clone()];
                cells.extend(ks.iter().map(|k| r.per_k[k].to_string()));
                cells.push(r.weighted_total.to_string());
                cells
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(path, &header, &rows)?;
    }

    let report = OracleReport {
        tool: ToolInfo::new("oracle"),
        provenance: loaded.provenance.clone(),
        scored_files,
        mode: args.mode,
        k_range: ks,
        oracle: OracleSets {
            per_k: oracle
                .per_k
                .iter()
                .map(|(&k, sets)| (k, sets.iter().map(|c| c.members().collect()).collect()))
                .collect(),
            best_value: oracle.best_value.clone(),
        },
        oracle_rank: info,
        table,
        dominance_holds,
        cache: loaded.cache_stats(),
        wall_time: ctx.wall_time(),
    };
    emit(&report, args.out.as_deref())
}
