//! One-shot 2:4 mask selection baselines.

use crate::error::{Error, Result};
use crate::model::{CalibSet, ToyModel};
use crate::tensor::{project_24, MaskTensor, WeightTensor};

/// Per-input-feature l2 norms of the activations feeding one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStats {
    col_norms: Vec<f64>,
}

impl ActivationStats {
    pub fn new(col_norms: Vec<f64>) -> Result<Self> {
        if col_norms.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParam(
                "column norms must be finite and >= 0".into(),
            ));
        }
        Ok(ActivationStats { col_norms })
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    /// Stats for every layer of `model`, measured on `data`. Later layers see
    /// the model's own hidden activations.
    pub fn for_model(model: &ToyModel, data: &CalibSet) -> Result<Vec<Self>> {
        let mut sq: Vec<Vec<f64>> = model.layers().iter().map(|w| vec![0.0; w.cols()]).collect();
        for i in 0..data.len() {
            for (acc, x) in sq.iter_mut().zip(model.layer_inputs(data.input(i))) {
                for (a, v) in acc.iter_mut().zip(x) {
                    *a += v * v;
                }
            }
        }
        sq.into_iter()
            .map(|s| ActivationStats::new(s.into_iter().map(f64::sqrt).collect()))
            .collect()
    }
}

/// Keep the two largest-magnitude weights per block.
pub fn magnitude_24(w0: &WeightTensor) -> MaskTensor {
    project_24(w0)
}

/// Keep the two largest `|w_ij| * ||x_j||` per block.
pub fn wanda_24(w0: &WeightTensor, acts: &ActivationStats) -> Result<MaskTensor> {
    if acts.col_norms.len() != w0.cols() {
        return Err(Error::InvalidParam(format!(
            "{} column norms for {} columns",
            acts.col_norms.len(),
            w0.cols()
        )));
    }
    let cols = w0.cols();
    let scores: Vec<f64> = w0
        .data()
        .iter()
        .enumerate()
        .map(|(k, v)| v.abs() * acts.col_norms[k % cols])
        .collect();
    crate::tensor::ops_top2_mask(w0.rows(), cols, &scores)
}
