//! Weight and mask tensors blocked in groups of four along the column
//! (input) dimension, plus the full-tensor operations built on the block
//! solvers.

mod io;
mod metrics;
mod ops;
mod reg;

pub use io::{read_mask, read_weights, write_mask, write_weights, MASK_MAGIC, WEIGHT_MAGIC};
pub use metrics::{mask_similarity, relative_norm_gap, sparsity_ratio_24};
pub(crate) use ops::top2_mask as ops_top2_mask;
pub use ops::{apply_mask_snap, project_24, prox_map, ProxDiagnostics};
pub use reg::{reg24_total, regw0_grad, regw0_value, RegW0Params};

use crate::error::{Error, Result};

/// Dense row-major weights. `cols` is always a multiple of four and every
/// entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightTensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if !cols.is_multiple_of(4) {
            return Err(Error::BadBlocking { cols });
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidParam(format!(
                "data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight tensor"));
        }
        Ok(WeightTensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn num_blocks(&self) -> usize {
        self.data.len() / 4
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(4)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Elementwise map that keeps the shape. Fails if the result is not
    /// finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise combination of two tensors of the same shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Concatenates several tensors into one `(n/4) x 4` tensor. Block
    /// boundaries are preserved because every input has `cols % 4 == 0`.
    pub fn concat_blocks(parts: &[WeightTensor]) -> Self {
        let data: Vec<f64> = parts.iter().flat_map(|t| t.data.iter().copied()).collect();
        WeightTensor {
            rows: data.len() / 4,
            cols: 4,
            data,
        }
    }
}

/// Boolean keep-mask with the same shape and blocking as a [`WeightTensor`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTensor {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl MaskTensor {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if !cols.is_multiple_of(4) {
            return Err(Error::BadBlocking { cols });
        }
        if bits.len() != rows * cols {
            return Err(Error::InvalidParam(format!(
                "mask length {} does not match shape {rows}x{cols}",
                bits.len()
            )));
        }
        Ok(MaskTensor { rows, cols, bits })
    }

    pub fn filled(rows: usize, cols: usize, keep: bool) -> Result<Self> {
        Self::new(rows, cols, vec![keep; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn kept(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn negate(&self) -> Self {
        MaskTensor {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Checks that every block keeps exactly two entries.
    pub fn validate_24(&self) -> Result<()> {
        for (block, chunk) in self.bits.chunks_exact(4).enumerate() {
            let kept = chunk.iter().filter(|b| **b).count();
            if kept != 2 {
                return Err(Error::InvalidMask { block, kept });
            }
        }
        Ok(())
    }

    pub fn is_24_valid(&self) -> bool {
        self.validate_24().is_ok()
    }

    pub fn concat_blocks(parts: &[MaskTensor]) -> Self {
        let bits: Vec<bool> = parts.iter().flat_map(|m| m.bits.iter().copied()).collect();
        MaskTensor {
            rows: bits.len() / 4,
            cols: 4,
            bits,
        }
    }

    pub(crate) fn check_matches(&self, w: &WeightTensor) -> Result<()> {
        if self.shape() != w.shape() {
            return Err(Error::ShapeMismatch {
                expected: w.shape(),
                got: self.shape(),
            });
        }
        Ok(())
    }
}
