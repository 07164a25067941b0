use rayon::prelude::*;

use super::{MaskTensor, WeightTensor};
use crate::error::Result;
use crate::prox::{enum_alm, Block4, ProxParams};

/// Side-channel counters from [`prox_map`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProxDiagnostics {
    pub blocks: usize,
    pub unconverged_blocks: usize,
}

/// Applies the blockwise prox of `lambda1 * reg24` to every block.
pub fn prox_map(
    w: &WeightTensor,
    lambda1: f64,
    params: &ProxParams,
) -> Result<(WeightTensor, ProxDiagnostics)> {
    let params = params.with_lambda(lambda1);
    let mut out = w.clone();
    if lambda1 == 0.0 {
        return Ok((
            out,
            ProxDiagnostics {
                blocks: w.num_blocks(),
                unconverged_blocks: 0,
            },
        ));
    }
    let unconverged: usize = out
        .data_mut()
        .par_chunks_exact_mut(4)
        .map(|chunk| {
            let y = Block4::from_slice(chunk).expect("tensor entries are finite");
            let sol = enum_alm(&y, &params);
            chunk.copy_from_slice(&sol.w);
            usize::from(!sol.converged)
        })
        .sum();
    Ok((
        out,
        ProxDiagnostics {
            blocks: w.num_blocks(),
            unconverged_blocks: unconverged,
        },
    ))
}

/// Indices of the two largest magnitudes in a block, lower index first on
/// ties.
#[inline]
pub(crate) fn top2(scores: &[f64]) -> [usize; 2] {
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    [idx[0], idx[1]]
}

/// Mask keeping, in every block, the two entries selected by `score`.
pub(crate) fn top2_mask(rows: usize, cols: usize, scores: &[f64]) -> Result<MaskTensor> {
    let mut bits = vec![false; scores.len()];
    for (b, chunk) in scores.chunks_exact(4).enumerate() {
        for k in top2(chunk) {
            bits[4 * b + k] = true;
        }
    }
    MaskTensor::new(rows, cols, bits)
}

/// Magnitude projection onto 2:4: keep the two largest `|w|` per block.
pub fn project_24(w: &WeightTensor) -> MaskTensor {
    let scores: Vec<f64> = w.data().iter().map(|v| v.abs()).collect();
    top2_mask(w.rows(), w.cols(), &scores).expect("shape comes from a valid tensor")
}

/// `w0 ⊙ mask`: kept entries are the original values, the rest exactly zero.
pub fn apply_mask_snap(w0: &WeightTensor, mask: &MaskTensor) -> Result<WeightTensor> {
    mask.check_matches(w0)?;
    mask.validate_24()?;
    let data = w0
        .data()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    WeightTensor::new(w0.rows(), w0.cols(), data)
}
