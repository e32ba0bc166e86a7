use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::LabeledDataset;
use super::model::{Activation, Affine, Layer, ModelSpec, Tensor};
use crate::error::{Error, Result};

pub const MAX_TRAIN_LAYERS: usize = 3;
pub const MAX_TRAIN_UNITS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden layer widths; the output layer is added automatically.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(hidden: Vec<usize>, epochs: usize, lr: f64, seed: u64) -> Self {
        Self {
            hidden,
            epochs,
            lr,
            seed,
        }
    }
}

struct DenseParams {
    w: Vec<f64>,
    b: Vec<f64>,
    fan_in: usize,
    out: usize,
}

/// Per-sample SGD on softmax cross-entropy for a dense ReLU network.
/// The first hidden layer is marked prunable.
pub fn train_toy_model(data: &LabeledDataset, cfg: &TrainConfig) -> Result<ModelSpec> {
    data.validate()?;
    if data.input_shape.len() != 1 {
        return Err(Error::InvalidArgument(
            "the trainer takes flat inputs only".into(),
        ));
    }
    let classes = data.n_classes();
    if cfg.hidden.is_empty() || cfg.hidden.len() + 1 > MAX_TRAIN_LAYERS {
        return Err(Error::InvalidArgument(format!(
            "need 1..={} hidden layers",
            MAX_TRAIN_LAYERS - 1
        )));
    }
    if cfg
        .hidden
        .iter()
        .chain([&classes])
        .any(|&u| u == 0 || u > MAX_TRAIN_UNITS)
    {
        return Err(Error::InvalidArgument(format!(
            "layer widths must be within 1..={MAX_TRAIN_UNITS}"
        )));
    }
    if !cfg.lr.is_finite() || cfg.lr < 0.0 {
        return Err(Error::InvalidArgument(
            "learning rate must be finite and non-negative".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut widths = vec![data.input_shape[0]];
    widths.extend(&cfg.hidden);
    widths.push(classes);
    let mut layers: Vec<DenseParams> = widths
        .windows(2)
        .map(|p| {
            let (fan_in, out) = (p[0], p[1]);
            let a = (6.0 / (fan_in + out) as f32).sqrt();
            let w = (0..fan_in * out)
                .map(|_| rng.random_range(-a..=a) as f64)
                .collect();
            DenseParams {
                w,
                b: vec![0.0; out],
                fan_in,
                out,
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            loss += sgd_step(&mut layers, &data.inputs[i], data.labels[i], cfg.lr);
        }
        if !loss.is_finite() || layers.iter().any(|l| l.w.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence { epoch });
        }
    }

    let last = layers.len() - 1;
    let layers = layers
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            Layer::Dense(Affine {
                weights: Tensor {
                    shape: vec![p.out, p.fan_in],
                    data: p.w.iter().map(|&v| v as f32).collect(),
                },
                bias: p.b.iter().map(|&v| v as f32).collect(),
                activation: if i == last {
                    Activation::SoftmaxLogits
                } else {
                    Activation::Relu
                },
                norm: None,
                mask: None,
            })
        })
        .collect();
    Ok(ModelSpec {
        input_shape: data.input_shape.clone(),
        layers,
        prunable_layer: 0,
    })
}

/// One forward/backward pass; returns the sample's loss.
fn sgd_step(layers: &mut [DenseParams], x: &[f32], label: usize, lr: f64) -> f64 {
    let last = layers.len() - 1;
    let mut acts: Vec<Vec<f64>> = vec![x.iter().map(|&v| v as f64).collect()];
    for (li, l) in layers.iter().enumerate() {
        let input = &acts[li];
        let z: Vec<f64> = (0..l.out)
            .map(|u| {
                l.b[u]
                    + l.w[u * l.fan_in..(u + 1) * l.fan_in]
                        .iter()
                        .zip(input)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect();
        acts.push(if li == last {
            z
        } else {
            z.into_iter().map(|v| v.max(0.0)).collect()
        });
    }

    let logits = &acts[last + 1];
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = -(exps[label] / total).ln();

    // dL/dz for the output layer: softmax − one-hot.
    let mut delta: Vec<f64> = exps.iter().map(|e| e / total).collect();
    delta[label] -= 1.0;
    for li in (0..=last).rev() {
        let l = &mut layers[li];
        let input = &acts[li];
        let mut back = vec![0.0; l.fan_in];
        for (u, &d) in delta.iter().enumerate().take(l.out) {
            let row = &mut l.w[u * l.fan_in..(u + 1) * l.fan_in];
            for ((w, x), g) in row.iter_mut().zip(input).zip(back.iter_mut()) {
                *g += *w * d;
                *w -= lr * d * x;
            }
            l.b[u] -= lr * d;
        }
        if li > 0 {
            delta = back
                .into_iter()
                .zip(input)
                .map(|(g, &a)| if a > 0.0 { g } else { 0.0 })
                .collect();
        }
    }
    loss
}

pub fn accuracy(model: &ModelSpec, data: &LabeledDataset) -> Result<f64> {
    let mut correct = 0usize;
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        if model.forward(x, None)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
