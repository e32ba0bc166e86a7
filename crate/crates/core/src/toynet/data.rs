use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub input_shape: Vec<usize>,
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(input_shape: Vec<usize>, inputs: Vec<Vec<f32>>, labels: Vec<usize>) -> Result<Self> {
        let d = Self {
            input_shape,
            inputs,
            labels,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Shape("dataset is empty".into()));
        }
        if self.inputs.len() != self.labels.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} labels",
                self.inputs.len(),
                self.labels.len()
            )));
        }
        let len: usize = self.input_shape.iter().product();
        if let Some(i) = self.inputs.iter().position(|x| x.len() != len) {
            return Err(Error::Shape(format!(
                "input {i} does not have shape {:?}",
                self.input_shape
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Contiguous train/validation/test split by fractions summing to 1.
    /// Empty parts are returned as `None`.
    pub fn split(&self, fractions: [f64; 3]) -> Result<[Option<LabeledDataset>; 3]> {
        if fractions.iter().any(|f| f.is_nan() || *f < 0.0)
            || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(format!(
                "split fractions {fractions:?} must be non-negative and sum to 1"
            )));
        }
        let m = self.len();
        let a = (fractions[0] * m as f64).round() as usize;
        let b = (a + (fractions[1] * m as f64).round() as usize).min(m);
        let part = |lo: usize, hi: usize| {
            (hi > lo).then(|| LabeledDataset {
                input_shape: self.input_shape.clone(),
                inputs: self.inputs[lo..hi].to_vec(),
                labels: self.labels[lo..hi].to_vec(),
            })
        };
        Ok([part(0, a), part(a, b), part(b, m)])
    }
}

/// Three 2-D Gaussian clusters; point `i` has label `i % 3`.
pub fn gaussian_blobs(n_points: usize, seed: u64) -> LabeledDataset {
    const CENTERS: [[f32; 2]; 3] = [[0.0, 2.5], [-2.2, -1.3], [2.2, -1.3]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 0.8).expect("valid std");
    let mut inputs = Vec::with_capacity(n_points);
    let mut labels = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let c = CENTERS[i % 3];
        inputs.push(vec![
            c[0] + noise.sample(&mut rng),
            c[1] + noise.sample(&mut rng),
        ]);
        labels.push(i % 3);
    }
    LabeledDataset {
        input_shape: vec![2],
        inputs,
        labels,
    }
}

/// Reads `x0,x1,...,label` with a header row.
pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let width = header.len();
    if width < 2 || header.get(width - 1) != Some("label") {
        return Err(Error::Parse("CSV header must be x0,...,label".into()));
    }
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let bad = |field: &str| Error::Parse(format!("row {}: bad value {field:?}", line + 1));
        let x = record
            .iter()
            .take(width - 1)
            .map(|f| f.trim().parse::<f32>().map_err(|_| bad(f)))
            .collect::<Result<Vec<_>>>()?;
        let last = &record[width - 1];
        labels.push(last.trim().parse::<usize>().map_err(|_| bad(last))?);
        inputs.push(x);
    }
    LabeledDataset::new(vec![width - 1], inputs, labels)
}

pub fn write_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let d = data.inputs.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    let io = |e: csv::Error| Error::Io(e.to_string());
    writer.write_record(&header).map_err(io)?;
    for (x, y) in data.inputs.iter().zip(&data.labels) {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(y.to_string());
        writer.write_record(&row).map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads an IDX image file (`0x00000803`, unsigned bytes) and an IDX label
/// file (`0x00000801`). Pixels are scaled to `[0, 1]`.
pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    let read = |p: &Path| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        std::fs::File::open(p)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        Ok(buf)
    };
    let (img, lab) = (read(images)?, read(labels)?);
    let be = |b: &[u8], at: usize| -> Result<usize> {
        b.get(at..at + 4)
            .map(|s| u32::from_be_bytes([s[0], s[1], s[2], s[3]]) as usize)
            .ok_or_else(|| Error::Parse("truncated IDX header".into()))
    };
    if be(&img, 0)? != 0x0803 || be(&lab, 0)? != 0x0801 {
        return Err(Error::Parse("unexpected IDX magic numbers".into()));
    }
    let (count, rows, cols) = (be(&img, 4)?, be(&img, 8)?, be(&img, 12)?);
    if be(&lab, 4)? != count {
        return Err(Error::Parse("IDX image and label counts differ".into()));
    }
    let pixels = rows * cols;
    if img.len() != 16 + count * pixels || lab.len() != 8 + count {
        return Err(Error::Parse(
            "IDX payload length does not match its header".into(),
        ));
    }
    let inputs = img[16..]
        .chunks(pixels.max(1))
        .take(count)
        .map(|c| c.iter().map(|&p| p as f32 / 255.0).collect())
        .collect();
    let labels = lab[8..].iter().map(|&l| l as usize).collect();
    LabeledDataset::new(vec![1, rows, cols], inputs, labels)
}
