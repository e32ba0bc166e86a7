//! Flat binary model files: one JSON header line, then every tensor as
//! contiguous little-endian `f32` in header order.
//!
//! Header: `{"dtype":"f32le","shapes":[...],"names":[...],"structure":{...}}`
//! where `structure` is the model JSON with all tensor data left empty.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dtype: String,
    shapes: Vec<Vec<usize>>,
    names: Vec<String>,
    structure: ModelSpec,
}

/// Visits every tensor in a fixed order as `(name, shape, data)`.
fn for_each_tensor(spec: &mut ModelSpec, mut visit: impl FnMut(String, Vec<usize>, &mut Vec<f32>)) {
    for (i, layer) in spec.layers.iter_mut().enumerate() {
        let Some(a) = layer.affine_mut() else {
            continue;
        };
        let units = a.units();
        visit(
            format!("layers.{i}.weights"),
            a.weights.shape.clone(),
            &mut a.weights.data,
        );
        visit(format!("layers.{i}.bias"), vec![units], &mut a.bias);
        if let Some(n) = &mut a.norm {
            for (tag, v) in [
                ("mean", &mut n.mean),
                ("var", &mut n.var),
                ("gamma", &mut n.gamma),
                ("beta", &mut n.beta),
            ] {
                visit(format!("layers.{i}.norm.{tag}"), vec![units], v);
            }
        }
    }
}

pub fn to_flat_bytes(spec: &ModelSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    let mut structure = spec.clone();
    let (mut shapes, mut names, mut payload) = (Vec::new(), Vec::new(), Vec::new());
    for_each_tensor(&mut structure, |name, shape, data| {
        payload.extend(data.iter().flat_map(|v| v.to_le_bytes()));
        data.clear();
        shapes.push(shape);
        names.push(name);
    });
    let header = Header {
        dtype: "f32le".into(),
        shapes,
        names,
        structure,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.extend(payload);
    Ok(out)
}

pub fn from_flat_bytes(bytes: &[u8]) -> Result<ModelSpec> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse("flat model has no header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Parse(format!("flat header: {e}")))?;
    if header.dtype != "f32le" {
        return Err(Error::Parse(format!(
            "unsupported dtype {:?}",
            header.dtype
        )));
    }
    let payload = &bytes[newline + 1..];
    let mut spec = header.structure;
    let mut offset = 0usize;
    let mut index = 0usize;
    let mut failure = None;
    for_each_tensor(&mut spec, |name, shape, data| {
        if failure.is_some() {
            return;
        }
        if header.shapes.get(index) != Some(&shape) || header.names.get(index) != Some(&name) {
            failure = Some(Error::Parse(format!(
                "tensor {index} ({name}) disagrees with the header"
            )));
            return;
        }
        let len: usize = shape.iter().product();
        let Some(raw) = payload.get(offset..offset + 4 * len) else {
            failure = Some(Error::Parse(format!("payload ends inside tensor {name}")));
            return;
        };
        *data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        offset += 4 * len;
        index += 1;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if index != header.shapes.len() || offset != payload.len() {
        return Err(Error::Parse(
            "flat payload length does not match the header".into(),
        ));
    }
    spec.validate()?;
    Ok(spec)
}

/// Loads a model from JSON or from the flat binary format.
pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let is_flat = serde_json::from_slice::<serde_json::Value>(first_line)
        .ok()
        .is_some_and(|v| v.get("dtype").is_some());
    let spec = if is_flat {
        from_flat_bytes(&bytes)?
    } else {
        serde_json::from_slice::<ModelSpec>(&bytes)
            .map_err(|e| Error::Parse(format!("model JSON: {e}")))?
    };
    spec.validate()?;
    Ok(spec)
}

pub fn save_model_json(path: &Path, spec: &ModelSpec) -> Result<()> {
    spec.validate()?;
    let mut text = serde_json::to_string_pretty(spec)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn save_model_flat(path: &Path, spec: &ModelSpec) -> Result<()> {
    std::fs::write(path, to_flat_bytes(spec)?)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toynet::model::{Activation, Affine, Layer, Norm, Tensor};

    fn model() -> ModelSpec {
        ModelSpec {
            input_shape: vec![1, 4, 4],
            layers: vec![
                Layer::Conv2d(Affine {
                    weights: Tensor::new(
                        vec![3, 1, 3, 3],
                        (0..27).map(|i| i as f32 * 0.1 - 1.3).collect(),
                    )
                    .unwrap(),
                    bias: vec![0.5, -0.25, f32::MIN_POSITIVE],
                    activation: Activation::Relu,
                    norm: Some(Norm {
                        mean: vec![0.0, 1.0, 2.0],
                        var: vec![1.0, 2.0, 3.0],
                        gamma: vec![1.0, 1.0, 0.5],
                        beta: vec![0.0, 0.1, 0.2],
                        eps: 1e-5,
                    }),
                    mask: Some(vec![true, false, true]),
                }),
                Layer::GlobalAvgPool,
                Layer::Dense(Affine {
                    weights: Tensor::new(vec![2, 3], vec![1.0, -1.0, 0.3, 0.7, 1e-7, -2.5])
                        .unwrap(),
                    bias: vec![0.0, 0.1],
                    activation: Activation::SoftmaxLogits,
                    norm: None,
                    mask: None,
                }),
            ],
            prunable_layer: 0,
        }
    }

    #[test]
    fn bit_exact_round_trip() {
        let bytes = to_flat_bytes(&model()).unwrap();
        assert_eq!(from_flat_bytes(&bytes).unwrap(), model());
        let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
        // 27 + 3 + 4·3 + 6 + 2 floats.
        assert_eq!(bytes.len() - header_end - 1, 4 * 50);
    }

    #[test]
    fn truncated_and_padded_payloads_fail() {
        let mut bytes = to_flat_bytes(&model()).unwrap();
        bytes.push(0);
        assert!(from_flat_bytes(&bytes).is_err());
        bytes.truncate(bytes.len() - 5);
        assert!(from_flat_bytes(&bytes).is_err());
    }

    #[test]
    fn load_detects_format() {
        let dir = tempfile::tempdir().unwrap();
        let (flat, json) = (dir.path().join("m.bin"), dir.path().join("m.json"));
        save_model_flat(&flat, &model()).unwrap();
        save_model_json(&json, &model()).unwrap();
        assert_eq!(load_model(&flat).unwrap(), model());
        assert_eq!(load_model(&json).unwrap(), model());
    }
}
