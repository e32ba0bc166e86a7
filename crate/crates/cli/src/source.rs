use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shaprank::toynet::{
    accuracy_char_fn, load_csv, load_idx, load_model, LabeledDataset, ModelSpec,
};
use shaprank::{CharacteristicFn, Game, TableGame};

use crate::error::{CliError, CliResult};

const CACHE_FORMAT: &str = "shaprank-cache";
const CACHE_VERSION: u32 = 1;

/// Where ν comes from: an explicit table or a model evaluated on data.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Game table JSON
    #[arg(long, conflicts_with_all = ["model", "data", "idx_images", "idx_labels", "layer"])]
    pub game: Option<PathBuf>,
    /// Model file (JSON or flat binary)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset CSV with columns x0,x1,...,label
    #[arg(long, conflicts_with_all = ["idx_images", "idx_labels"])]
    pub data: Option<PathBuf>,
    /// IDX image file (use with --idx-labels)
    #[arg(long, requires = "idx_labels")]
    pub idx_images: Option<PathBuf>,
    /// IDX label file (use with --idx-images)
    #[arg(long, requires = "idx_images")]
    pub idx_labels: Option<PathBuf>,
    /// Prunable layer, 1-based; defaults to the one recorded in the model
    #[arg(long)]
    pub layer: Option<usize>,
    /// Data split fractions train:val:test; ν is measured on the validation part
    #[arg(long, default_value = "0:1:0")]
    pub split: String,
    /// JSON-lines file of cached coalition values, read and updated
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Identity of the game, embedded in reports.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub inputs: BTreeMap<String, InputFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<[f64; 3]>,
    pub content_hash: String,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CacheStats {
    pub preloaded: usize,
    pub evaluations: u64,
    pub hits: u64,
}

pub struct LoadedGame {
    pub game: Game,
    pub provenance: Provenance,
    pub model: Option<(ModelSpec, LabeledDataset)>,
    cache_path: Option<PathBuf>,
    preloaded: usize,
}

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    version: u32,
    content_hash: String,
    n_players: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_input(
    name: &str,
    path: &Path,
    inputs: &mut BTreeMap<String, InputFile>,
) -> CliResult<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    inputs.insert(
        name.to_string(),
        InputFile {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        },
    );
    Ok(bytes)
}

pub fn parse_split(text: &str) -> CliResult<[f64; 3]> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Usage(format!("--split expects three numbers a:b:c, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.trim().parse::<f64>().map_err(|_| bad())?;
        if !o.is_finite() || *o < 0.0 {
            return Err(bad());
        }
    }
    let total: f64 = out.iter().sum();
    if total <= 0.0 || out[1] <= 0.0 {
        return Err(CliError::Usage(
            "--split needs a positive validation fraction".into(),
        ));
    }
    Ok(out.map(|f| f / total))
}

impl SourceArgs {
    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }

    /// Loads the model, dataset and validation split without building a game.
    pub fn load_model_data(
        &self,
        inputs: &mut BTreeMap<String, InputFile>,
    ) -> CliResult<(ModelSpec, LabeledDataset, [f64; 3])> {
        let model_path = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Usage("a model source needs --model".into()))?;
        read_input("model", model_path, inputs)?;
        let mut spec = load_model(model_path)?;
        if let Some(layer) = self.layer {
            let affine = spec
                .layers
                .get(layer.wrapping_sub(1))
                .and_then(|l| l.affine());
            if layer == 0 || affine.is_none() {
                return Err(CliError::Usage(format!(
                    "--layer {layer} is not a dense or conv layer (layers are numbered from 1)"
                )));
            }
            spec.prunable_layer = layer - 1;
            spec.validate()?;
        }
        let data = match (&self.data, &self.idx_images, &self.idx_labels) {
            (Some(csv), None, None) => {
                read_input("data", csv, inputs)?;
                load_csv(csv)?
            }
            (None, Some(images), Some(labels)) => {
                read_input("idx_images", images, inputs)?;
                read_input("idx_labels", labels, inputs)?;
                load_idx(images, labels)?
            }
            _ => {
                return Err(CliError::Usage(
                    "a model source needs --data or --idx-images/--idx-labels".into(),
                ))
            }
        };
        let split = parse_split(&self.split)?;
        Ok((spec, data, split))
    }

    pub fn load(&self) -> CliResult<LoadedGame> {
        let mut inputs = BTreeMap::new();
        let (char_fn, layer, split, model): (Arc<dyn CharacteristicFn>, _, _, _) =
            match (&self.game, &self.model) {
                (Some(path), None) => {
                    let bytes = read_input("game", path, &mut inputs)?;
                    let text = String::from_utf8(bytes)
                        .map_err(|_| CliError::Io(format!("{}: not UTF-8", path.display())))?;
                    (Arc::new(TableGame::from_json(&text)?), None, None, None)
                }
                (None, Some(_)) => {
                    let (spec, data, split) = self.load_model_data(&mut inputs)?;
                    let [_, val, _] = data.split(split)?;
                    let val =
                        val.ok_or_else(|| CliError::Usage("the validation split is empty".into()))?;
                    let f = accuracy_char_fn(&spec, &val)?;
                    (
                        Arc::new(f),
                        Some(spec.prunable_layer + 1),
                        Some(split),
                        Some((spec, val)),
                    )
                }
                _ => {
                    return Err(CliError::Usage(
                        "give either --game or --model with data".into(),
                    ))
                }
            };

        let mut identity = String::new();
        for (name, file) in &inputs {
            identity.push_str(&format!("{name}={};", file.sha256));
        }
        if let Some(l) = layer {
            identity.push_str(&format!("layer={l};"));
        }
        if let Some(s) = split {
            identity.push_str(&format!("split={}:{}:{};", s[0], s[1], s[2]));
        }
        let content_hash = sha256_hex(identity.as_bytes());

        let n = char_fn.n_players();
        let entries = match &self.cache {
            Some(path) if path.exists() => read_cache(path, &content_hash, n)?,
            _ => Vec::new(),
        };
        let preloaded = entries.len();
        let game = Game::with_cache(char_fn, entries)?;
        Ok(LoadedGame {
            game,
            provenance: Provenance {
                inputs,
                layer,
                split,
                content_hash,
            },
            model,
            cache_path: self.cache.clone(),
            preloaded,
        })
    }
}

fn read_cache(path: &Path, content_hash: &str, n_players: usize) -> CliResult<Vec<(u64, f64)>> {
    let file =
        fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let mismatch = |why: String| CliError::CacheMismatch(format!("{}: {why}", path.display()));
    let header: CacheHeader = match lines.next() {
        Some(Ok(line)) => {
            serde_json::from_str(&line).map_err(|e| mismatch(format!("unreadable header: {e}")))?
        }
        _ => return Err(mismatch("missing header".into())),
    };
    if header.format != CACHE_FORMAT || header.version != CACHE_VERSION {
        return Err(mismatch(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    if header.content_hash != content_hash || header.n_players != n_players {
        return Err(mismatch("cache was written for a different game".into()));
    }
    let limit = shaprank::coalition::full_mask(n_players);
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (bits, value): (u64, f64) = serde_json::from_str(&line)
            .map_err(|e| CliError::Io(format!("{} line {}: {e}", path.display(), i + 2)))?;
        if bits & !limit != 0 || !value.is_finite() {
            return Err(CliError::Io(format!(
                "{} line {}: invalid entry",
                path.display(),
                i + 2
            )));
        }
        entries.push((bits, value));
    }
    Ok(entries)
}

impl LoadedGame {
    pub fn n_players(&self) -> usize {
        self.game.n_players()
    }

    pub fn cache_stats(&self) -> CacheStats {
        CacheStats {
            preloaded: self.preloaded,
            evaluations: self.game.eval_count(),
            hits: self.game.hit_count(),
        }
    }

    /// Writes every known coalition value back to the cache file, if one was given.
    pub fn save_cache(&self) -> CliResult<()> {
        let Some(path) = &self.cache_path else {
            return Ok(());
        };
        let header = CacheHeader {
            format: CACHE_FORMAT.into(),
            version: CACHE_VERSION,
            content_hash: self.provenance.content_hash.clone(),
            n_players: self.n_players(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for (bits, value) in self.game.cached_values() {
            out.push_str(&serde_json::to_string(&(bits, value))?);
            out.push('\n');
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)
                .map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
            f.write_all(out.as_bytes())?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}
