use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use shaprank::toynet::{
    accuracy, append_dummy_unit, gaussian_blobs, load_csv, save_model_flat, save_model_json,
    train_toy_model, write_csv, TrainConfig,
};

use crate::error::{CliError, CliResult};
use crate::report::{emit, Context, ToolInfo};
use crate::source::{sha256_hex, InputFile};

#[derive(Debug, Clone, Args)]
pub struct TrainToyArgs {
    /// Training CSV; synthetic Gaussian blobs when omitted
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of blob points generated when --data is omitted
    #[arg(long, default_value_t = 300)]
    pub points: usize,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Append a unit with zero outgoing weights to the first hidden layer
    #[arg(long)]
    pub dummy: bool,
    /// Path of the trained model
    #[arg(long)]
    pub out: PathBuf,
    /// Write the model in the flat binary format instead of JSON
    #[arg(long)]
    pub flat: bool,
    /// Also write the training data as CSV
    #[arg(long)]
    pub write_data: Option<PathBuf>,
    /// Summary path (stdout when omitted)
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct TrainReport {
    pub tool: ToolInfo,
    pub inputs: BTreeMap<String, InputFile>,
    pub config: TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blob_points: Option<usize>,
    pub dummy: bool,
    pub n_players: usize,
    pub train_accuracy: f64,
    pub output: String,
    pub output_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

pub fn run(args: &TrainToyArgs, ctx: &Context) -> CliResult<()> {
    let mut inputs = BTreeMap::new();
    let data = match &args.data {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            inputs.insert(
                "data".to_string(),
                InputFile {
                    path: path.display().to_string(),
                    sha256: sha256_hex(&bytes),
                },
            );
            load_csv(path)?
        }
        None => gaussian_blobs(args.points, args.seed),
    };
    let cfg = TrainConfig::new(args.hidden.clone(), args.epochs, args.lr, args.seed);
    let mut model = train_toy_model(&data, &cfg)?;
    if args.dummy {
        model = append_dummy_unit(&model)?;
    }
    let train_accuracy = accuracy(&model, &data)?;

    if args.flat {
        save_model_flat(&args.out, &model)?;
    } else {
        save_model_json(&args.out, &model)?;
    }
    if let Some(path) = &args.write_data {
        write_csv(path, &data)?;
    }
    let written = std::fs::read(&args.out)?;

    let report = TrainReport {
        tool: ToolInfo::new("train-toy"),
        inputs,
        config: cfg,
        blob_points: args.data.is_none().then_some(args.points),
        dummy: args.dummy,
        n_players: model.n_players(),
        train_accuracy,
        output: args.out.display().to_string(),
        output_sha256: sha256_hex(&written),
        wall_time: ctx.wall_time(),
    };
    emit(&report, args.report.as_deref())
}
