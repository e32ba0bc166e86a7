use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let t = Self { shape, data };
        t.validate()?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!(
                "tensor of shape {:?} holds {} values",
                self.shape,
                self.data.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    /// Raw logits feeding a softmax; the argmax is taken directly.
    SoftmaxLogits,
}

/// Inference-time normalization `γ·(z − μ)/√(σ² + ε) + β` per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Norm {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub eps: f32,
}

/// Weights shared by dense (`[out, in]`) and conv (`[out_c, in_c, kh, kw]`) layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub weights: Tensor,
    pub bias: Vec<f32>,
    pub activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<Norm>,
    /// `false` marks a unit removed by pruning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
}

impl Affine {
    pub fn units(&self) -> usize {
        self.weights.shape.first().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense(Affine),
    /// Stride 1, zero "same" padding, odd kernel sizes.
    Conv2d(Affine),
    GlobalAvgPool,
}

impl Layer {
    pub fn affine(&self) -> Option<&Affine> {
        match self {
            Layer::Dense(a) | Layer::Conv2d(a) => Some(a),
            Layer::GlobalAvgPool => None,
        }
    }

    pub fn affine_mut(&mut self) -> Option<&mut Affine> {
        match self {
            Layer::Dense(a) | Layer::Conv2d(a) => Some(a),
            Layer::GlobalAvgPool => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
    /// Index into `layers` of the layer whose units are the players.
    pub prunable_layer: usize,
}

impl ModelSpec {
    /// Checks that layer shapes compose and returns the output shape.
    pub fn validate(&self) -> Result<Vec<usize>> {
        if self.layers.is_empty() {
            return Err(Error::Shape("model has no layers".into()));
        }
        let mut shape = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer_output_shape(layer, &shape).map_err(|e| match e {
                Error::Shape(m) => Error::Shape(format!("layer {i}: {m}")),
                other => other,
            })?;
        }
        match self.layers.get(self.prunable_layer) {
            Some(l) if l.affine().is_some() => {}
            _ => {
                return Err(Error::Shape(format!(
                    "prunable layer {} is not a dense or conv2d layer",
                    self.prunable_layer
                )))
            }
        }
        if self.n_players() > crate::coalition::MAX_PLAYERS {
            return Err(Error::Shape(format!(
                "prunable layer has {} units; at most 64 are supported",
                self.n_players()
            )));
        }
        Ok(shape)
    }

    /// Units (dense) or output channels (conv2d) of the prunable layer.
    pub fn n_players(&self) -> usize {
        self.layers
            .get(self.prunable_layer)
            .and_then(Layer::affine)
            .map_or(0, Affine::units)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Final-layer outputs with only the units in `active` switched on in
    /// the prunable layer (all units when `None`).
    pub fn logits(&self, input: &[f32], active: Option<Coalition>) -> Result<Vec<f64>> {
        self.validate()?;
        if input.len() != self.input_len() {
            return Err(Error::Shape(format!(
                "input has {} values, model expects shape {:?}",
                input.len(),
                self.input_shape
            )));
        }
        if let Some(c) = active {
            if c.n_players() != self.n_players() {
                return Err(Error::Shape(
                    "coalition does not match the prunable layer".into(),
                ));
            }
        }
        let x: Vec<f64> = input.iter().map(|&v| v as f64).collect();
        let (out, _) = self.run(
            0..self.layers.len(),
            x,
            self.input_shape.clone(),
            active.map(|c| c.bits()),
        );
        Ok(out)
    }

    /// Predicted class: the first index of the largest logit.
    pub fn forward(&self, input: &[f32], active: Option<Coalition>) -> Result<usize> {
        Ok(argmax(&self.logits(input, active)?))
    }

    /// A copy with the units outside `keep` permanently masked.
    pub fn with_mask(&self, keep: Coalition) -> Result<ModelSpec> {
        let n = self.n_players();
        if keep.n_players() != n {
            return Err(Error::Shape(
                "mask does not match the prunable layer".into(),
            ));
        }
        let mut out = self.clone();
        let layer = out.layers[self.prunable_layer]
            .affine_mut()
            .expect("validated");
        let old = layer.mask.clone().unwrap_or_else(|| vec![true; n]);
        layer.mask = Some((0..n).map(|i| old[i] && keep.contains(i)).collect());
        Ok(out)
    }

    pub(crate) fn run(
        &self,
        range: std::ops::Range<usize>,
        mut x: Vec<f64>,
        mut shape: Vec<usize>,
        active: Option<u64>,
    ) -> (Vec<f64>, Vec<usize>) {
        for i in range {
            let coalition = if i == self.prunable_layer {
                active
            } else {
                None
            };
            (x, shape) = apply_layer(&self.layers[i], &x, &shape, coalition);
        }
        (x, shape)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn layer_output_shape(layer: &Layer, shape: &[usize]) -> Result<Vec<usize>> {
    let out = match layer {
        Layer::Dense(a) => {
            let w = &a.weights.shape;
            if w.len() != 2 || w[1] != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!(
                    "dense weights {w:?} do not accept input {shape:?}"
                )));
            }
            vec![w[0]]
        }
        Layer::Conv2d(a) => {
            let w = &a.weights.shape;
            if shape.len() != 3 || w.len() != 4 || w[1] != shape[0] {
                return Err(Error::Shape(format!(
                    "conv weights {w:?} do not accept input {shape:?}"
                )));
            }
            if w[2] % 2 == 0 || w[3] % 2 == 0 {
                return Err(Error::Shape(format!(
                    "conv kernel {w:?} must have odd sizes"
                )));
            }
            vec![w[0], shape[1], shape[2]]
        }
        Layer::GlobalAvgPool => {
            if shape.len() != 3 {
                return Err(Error::Shape(format!(
                    "global pooling needs a [c, h, w] input, got {shape:?}"
                )));
            }
            vec![shape[0]]
        }
    };
    if let Some(a) = layer.affine() {
        a.weights.validate()?;
        let units = a.units();
        if a.bias.len() != units {
            return Err(Error::Shape(format!(
                "bias has {} entries for {units} units",
                a.bias.len()
            )));
        }
        if let Some(m) = &a.mask {
            if m.len() != units {
                return Err(Error::Shape(format!(
                    "mask has {} entries for {units} units",
                    m.len()
                )));
            }
        }
        if let Some(n) = &a.norm {
            if [&n.mean, &n.var, &n.gamma, &n.beta]
                .iter()
                .any(|v| v.len() != units)
            {
                return Err(Error::Shape(
                    "normalization statistics do not match the unit count".into(),
                ));
            }
        }
    }
    Ok(out)
}

fn apply_layer(
    layer: &Layer,
    x: &[f64],
    shape: &[usize],
    active: Option<u64>,
) -> (Vec<f64>, Vec<usize>) {
    let (mut out, out_shape) = match layer {
        Layer::GlobalAvgPool => {
            let (c, hw) = (shape[0], shape[1] * shape[2]);
            let pooled = (0..c)
                .map(|ch| x[ch * hw..(ch + 1) * hw].iter().sum::<f64>() / hw as f64)
                .collect();
            return (pooled, vec![c]);
        }
        Layer::Dense(a) => {
            let (units, fan_in) = (a.weights.shape[0], a.weights.shape[1]);
            let w = &a.weights.data;
            let out = (0..units)
                .map(|u| {
                    let row = &w[u * fan_in..(u + 1) * fan_in];
                    a.bias[u] as f64
                        + row
                            .iter()
                            .zip(x)
                            .map(|(&wi, xi)| wi as f64 * xi)
                            .sum::<f64>()
                })
                .collect();
            (out, vec![units])
        }
        Layer::Conv2d(a) => conv2d(a, x, shape),
    };

    let a = layer.affine().expect("pooling returned early");
    let units = out_shape[0];
    let per_unit = out.len() / units;
    for u in 0..units {
        let on =
            a.mask.as_ref().is_none_or(|m| m[u]) && active.is_none_or(|bits| bits >> u & 1 == 1);
        let chunk = &mut out[u * per_unit..(u + 1) * per_unit];
        if !on {
            chunk.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        if let Some(n) = &a.norm {
            let scale = n.gamma[u] as f64 / (n.var[u] as f64 + n.eps as f64).sqrt();
            chunk
                .iter_mut()
                .for_each(|v| *v = scale * (*v - n.mean[u] as f64) + n.beta[u] as f64);
        }
        if a.activation == Activation::Relu {
            chunk.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    (out, out_shape)
}

fn conv2d(a: &Affine, x: &[f64], shape: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let (in_c, h, w) = (shape[0], shape[1], shape[2]);
    let (out_c, kh, kw) = (a.weights.shape[0], a.weights.shape[2], a.weights.shape[3]);
    let (ph, pw) = (kh as isize / 2, kw as isize / 2);
    let k = &a.weights.data;
    let mut out = vec![0.0; out_c * h * w];
    for o in 0..out_c {
        for r in 0..h {
            for c in 0..w {
                let mut acc = a.bias[o] as f64;
                for i in 0..in_c {
                    for dr in 0..kh {
                        let rr = r as isize + dr as isize - ph;
                        if rr < 0 || rr >= h as isize {
                            continue;
                        }
                        for dc in 0..kw {
                            let cc = c as isize + dc as isize - pw;
                            if cc < 0 || cc >= w as isize {
                                continue;
                            }
                            let wi = k[((o * in_c + i) * kh + dr) * kw + dc] as f64;
                            acc += wi * x[(i * h + rr as usize) * w + cc as usize];
                        }
                    }
                }
                out[(o * h + r) * w + c] = acc;
            }
        }
    }
    (out, vec![out_c, h, w])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(out: usize, inp: usize, data: Vec<f32>, bias: Vec<f32>, act: Activation) -> Layer {
        Layer::Dense(Affine {
            weights: Tensor::new(vec![out, inp], data).unwrap(),
            bias,
            activation: act,
            norm: None,
            mask: None,
        })
    }

    fn two_layer() -> ModelSpec {
        ModelSpec {
            input_shape: vec![2],
            layers: vec![
                dense(
                    3,
                    2,
                    vec![1.0, 0.0, 0.0, 1.0, -1.0, -1.0],
                    vec![0.0, 0.0, 0.5],
                    Activation::Relu,
                ),
                dense(
                    2,
                    3,
                    vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
                    vec![0.0, 0.25],
                    Activation::SoftmaxLogits,
                ),
            ],
            prunable_layer: 0,
        }
    }

    #[test]
    fn hand_traced_forward() {
        let m = two_layer();
        // h = relu(1, 3, 0.5 − 4) = (1, 3, 0); logits = (1 + 0, 3 + 0.25).
        assert_eq!(m.logits(&[1.0, 3.0], None).unwrap(), vec![1.0, 3.25]);
        assert_eq!(m.forward(&[1.0, 3.0], None).unwrap(), 1);
        let only0 = Coalition::from_players([0], 3).unwrap();
        assert_eq!(m.logits(&[1.0, 3.0], Some(only0)).unwrap(), vec![1.0, 0.25]);
    }

    #[test]
    fn empty_mask_gives_constant_prediction() {
        let m = two_layer();
        let empty = Coalition::empty(3);
        let preds: Vec<usize> = [[5.0, -2.0], [0.0, 9.0], [-3.0, -3.0]]
            .iter()
            .map(|x| m.forward(x, Some(empty)).unwrap())
            .collect();
        assert_eq!(preds, vec![1, 1, 1]);
        assert_eq!(
            m.logits(&[5.0, -2.0], Some(empty)).unwrap(),
            vec![0.0, 0.25]
        );
    }

    #[test]
    fn full_mask_matches_unmasked() {
        let m = two_layer();
        let x = [0.3, -0.7];
        assert_eq!(
            m.logits(&x, Some(Coalition::grand(3))).unwrap(),
            m.logits(&x, None).unwrap()
        );
    }

    #[test]
    fn persistent_mask_and_norm_are_zeroed() {
        let mut m = two_layer();
        if let Layer::Dense(a) = &mut m.layers[0] {
            a.norm = Some(Norm {
                mean: vec![0.0, 1.0, 0.0],
                var: vec![1.0, 1.0, 1.0],
                gamma: vec![1.0, 2.0, 1.0],
                beta: vec![0.0, 0.0, 5.0],
                eps: 0.0,
            });
        }
        // Unit 2 would output relu(β = 5 + …) if not masked.
        let masked = m
            .with_mask(Coalition::from_players([0, 1], 3).unwrap())
            .unwrap();
        let x = [1.0, 3.0];
        assert_eq!(masked.logits(&x, None).unwrap(), vec![1.0, 4.25]);
        let unmasked = m.logits(&x, None).unwrap();
        assert!(unmasked[0] > 1.0);
    }

    #[test]
    fn conv_and_pool() {
        // One 3x3 input channel, two output channels: identity kernel and a
        // box kernel, then global average pooling.
        let mut k = vec![0.0f32; 2 * 9];
        k[4] = 1.0;
        k[9..].iter_mut().for_each(|v| *v = 1.0);
        let m = ModelSpec {
            input_shape: vec![1, 3, 3],
            layers: vec![
                Layer::Conv2d(Affine {
                    weights: Tensor::new(vec![2, 1, 3, 3], k).unwrap(),
                    bias: vec![0.0, 0.0],
                    activation: Activation::Identity,
                    norm: None,
                    mask: None,
                }),
                Layer::GlobalAvgPool,
            ],
            prunable_layer: 0,
        };
        let x = [1.0f32; 9];
        let out = m.logits(&x, None).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12);
        // Box sums on a 3x3 grid of ones with zero padding: 4 corners·4 + 4 edges·6 + 9.
        assert!((out[1] - 49.0 / 9.0).abs() < 1e-12);
        let only1 = Coalition::from_players([1], 2).unwrap();
        assert_eq!(m.logits(&x, Some(only1)).unwrap()[0], 0.0);
    }

    #[test]
    fn shape_errors() {
        let m = two_layer();
        assert!(matches!(m.forward(&[1.0], None), Err(Error::Shape(_))));
        let mut bad = two_layer();
        bad.layers.swap(0, 1);
        assert!(bad.validate().is_err());
        let mut bad = two_layer();
        bad.prunable_layer = 7;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_value(two_layer()).unwrap();
        assert_eq!(json["layers"][0]["kind"], "dense");
        assert_eq!(json["layers"][1]["activation"], "softmax_logits");
        let back: ModelSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, two_layer());
    }
}
