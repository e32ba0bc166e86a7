use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::data::{gaussian_blobs, LabeledDataset};
use super::model::{Activation, Affine, Layer, ModelSpec, Tensor};
use super::train::{train_toy_model, TrainConfig};
use crate::error::{Error, Result};

/// Player index of the zero-output unit in [`toy_fixture`].
pub const TOY_DUMMY_PLAYER: usize = 8;

/// The bundled toy model: 8 hidden units trained on 300 blob points
/// (seed 0, 200 epochs, lr 0.1) plus a ninth unit with zero outgoing weights.
pub fn toy_fixture() -> Result<(ModelSpec, LabeledDataset)> {
    let data = gaussian_blobs(300, 0);
    let model = train_toy_model(&data, &TrainConfig::new(vec![8], 200, 0.1, 0))?;
    Ok((append_dummy_unit(&model)?, data))
}

/// Appends a unit to the prunable layer with the incoming weights of `source`
/// and the given outgoing column.
fn append_unit(spec: &ModelSpec, source: usize, outgoing: Option<Vec<f32>>) -> Result<ModelSpec> {
    spec.validate()?;
    let p = spec.prunable_layer;
    let mut out = spec.clone();
    let (Some(Layer::Dense(a)), Some(Layer::Dense(next))) =
        (out.layers.get(p), out.layers.get(p + 1))
    else {
        return Err(Error::Shape(
            "unit insertion needs a dense layer followed by a dense layer".into(),
        ));
    };
    let (mut a, mut next) = (a.clone(), next.clone());
    let (units, fan_in) = (a.weights.shape[0], a.weights.shape[1]);
    if source >= units {
        return Err(Error::InvalidArgument(format!(
            "unit {source} outside 0..{units}"
        )));
    }

    a.weights
        .data
        .extend_from_within(source * fan_in..(source + 1) * fan_in);
    a.weights.shape[0] += 1;
    a.bias.push(a.bias[source]);
    if let Some(n) = &mut a.norm {
        for v in [&mut n.mean, &mut n.var, &mut n.gamma, &mut n.beta] {
            v.push(v[source]);
        }
    }
    if let Some(m) = &mut a.mask {
        m.push(true);
    }

    let rows = next.weights.shape[0];
    let column = match outgoing {
        Some(c) => c,
        None => (0..rows)
            .map(|r| next.weights.data[r * units + source])
            .collect(),
    };
    let mut data = Vec::with_capacity(rows * (units + 1));
    for (r, &c) in column.iter().enumerate() {
        data.extend_from_slice(&next.weights.data[r * units..(r + 1) * units]);
        data.push(c);
    }
    next.weights = Tensor::new(vec![rows, units + 1], data)?;

    out.layers[p] = Layer::Dense(a);
    out.layers[p + 1] = Layer::Dense(next);
    out.validate()?;
    Ok(out)
}

/// Adds an exact copy (incoming and outgoing weights) of `unit`.
pub fn duplicate_unit(spec: &ModelSpec, unit: usize) -> Result<ModelSpec> {
    append_unit(spec, unit, None)
}

/// Adds a unit that is active but has all outgoing weights zero.
pub fn append_dummy_unit(spec: &ModelSpec) -> Result<ModelSpec> {
    let rows = match spec.layers.get(spec.prunable_layer + 1) {
        Some(Layer::Dense(next)) => next.weights.shape[0],
        _ => {
            return Err(Error::Shape(
                "unit insertion needs a dense layer followed by a dense layer".into(),
            ))
        }
    };
    append_unit(spec, 0, Some(vec![0.0; rows]))
}

/// A 10-unit hand-built network with `redundancy` duplicated feature units.
///
/// There are `10 − redundancy` classes with seeded, unequal frequencies,
/// sorted most frequent first. Inputs are `e_y` plus Gaussian noise. Each
/// class has a detector unit and the `redundancy` most frequent classes have
/// a second one; unit positions are shuffled by the seed. Without its detector a sample falls back to the
/// least frequent class, which carries a positive output bias.
pub fn redundancy_network(redundancy: usize, seed: u64) -> Result<(ModelSpec, LabeledDataset)> {
    const UNITS: usize = 10;
    const SAMPLES: usize = 400;
    if redundancy > UNITS / 2 {
        return Err(Error::InvalidArgument(format!(
            "redundancy {redundancy} exceeds {}",
            UNITS / 2
        )));
    }
    let classes = UNITS - redundancy;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut weights: Vec<f64> = (0..classes)
        .map(|_| rng.random_range(0.0..2.0f64).exp())
        .collect();
    weights.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = weights.iter().sum();
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| ((w / total) * SAMPLES as f64).floor().max(1.0) as usize)
        .collect();
    let short = SAMPLES.saturating_sub(counts.iter().sum());
    counts[0] += short;

    let noise = Normal::new(0.0f32, 0.15).expect("valid std");
    let mut inputs = Vec::with_capacity(SAMPLES);
    let mut labels = Vec::with_capacity(SAMPLES);
    for (c, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let mut x: Vec<f32> = (0..classes).map(|_| noise.sample(&mut rng)).collect();
            x[c] += 1.0;
            inputs.push(x);
            labels.push(c);
        }
    }

    let mut detects: Vec<usize> = (0..classes).chain(0..redundancy).collect();
    detects.shuffle(&mut rng);
    let mut hidden = vec![0.0f32; UNITS * classes];
    let mut head = vec![0.0f32; classes * UNITS];
    for (u, &c) in detects.iter().enumerate() {
        hidden[u * classes + c] = 1.0;
        head[c * UNITS + u] = 1.0;
    }
    let mut head_bias = vec![0.0f32; classes];
    head_bias[classes - 1] = 0.5;

    let spec = ModelSpec {
        input_shape: vec![classes],
        layers: vec![
            Layer::Dense(Affine {
                weights: Tensor::new(vec![UNITS, classes], hidden)?,
                bias: vec![0.0; UNITS],
                activation: Activation::Relu,
                norm: None,
                mask: None,
            }),
            Layer::Dense(Affine {
                weights: Tensor::new(vec![classes, UNITS], head)?,
                bias: head_bias,
                activation: Activation::SoftmaxLogits,
                norm: None,
                mask: None,
            }),
        ],
        prunable_layer: 0,
    };
    spec.validate()?;
    Ok((spec, LabeledDataset::new(vec![classes], inputs, labels)?))
}
