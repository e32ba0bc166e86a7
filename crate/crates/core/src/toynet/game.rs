use super::data::LabeledDataset;
use super::model::{argmax, ModelSpec};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::CharacteristicFn;

/// `ν(K)`: the fraction of samples classified correctly with only the
/// units in `K` active in the prunable layer.
#[derive(Debug, Clone)]
pub struct AccuracyFn {
    spec: ModelSpec,
    /// Inputs to the prunable layer, which do not depend on the coalition.
    prefix: Vec<Vec<f64>>,
    prefix_shape: Vec<usize>,
    labels: Vec<usize>,
}

pub fn accuracy_char_fn(spec: &ModelSpec, data: &LabeledDataset) -> Result<AccuracyFn> {
    spec.validate()?;
    data.validate()?;
    if data.input_shape != spec.input_shape {
        return Err(Error::Shape(format!(
            "dataset inputs have shape {:?}, model expects {:?}",
            data.input_shape, spec.input_shape
        )));
    }
    let mut prefix_shape = spec.input_shape.clone();
    let prefix = data
        .inputs
        .iter()
        .map(|x| {
            let x = x.iter().map(|&v| v as f64).collect();
            let (out, shape) = spec.run(0..spec.prunable_layer, x, spec.input_shape.clone(), None);
            prefix_shape = shape;
            out
        })
        .collect();
    Ok(AccuracyFn {
        spec: spec.clone(),
        prefix,
        prefix_shape,
        labels: data.labels.clone(),
    })
}

impl AccuracyFn {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Predicted class of every sample under `coalition`.
    pub fn predictions(&self, coalition: Coalition) -> Vec<usize> {
        self.prefix
            .iter()
            .map(|x| {
                let (logits, _) = self.spec.run(
                    self.spec.prunable_layer..self.spec.layers.len(),
                    x.clone(),
                    self.prefix_shape.clone(),
                    Some(coalition.bits()),
                );
                argmax(&logits)
            })
            .collect()
    }
}

impl CharacteristicFn for AccuracyFn {
    fn n_players(&self) -> usize {
        self.spec.n_players()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        let correct = self
            .predictions(coalition)
            .iter()
            .zip(&self.labels)
            .filter(|(p, y)| p == y)
            .count();
        Ok(correct as f64 / self.labels.len() as f64)
    }
}
