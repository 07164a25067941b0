//! The outer proximal-gradient training loop.

mod config;
mod optim;
mod run;

use std::io::{Read, Write};

pub use config::{ablation_arms, lr_at, ConstraintArm, OptimizerKind, TrainConfig};
pub use optim::GradStepper;
pub use run::{train, train_observed, MetricsRecord, TrainResult};

use crate::error::{Error, Result};
use crate::tensor::{read_weights, write_weights, WeightTensor};

pub const METRICS_COLUMNS: [&str; 7] = [
    "step",
    "loss",
    "sparsity_ratio",
    "mask_similarity",
    "rel_norm_gap",
    "reg24",
    "regw0",
];

/// Writes snapshots as CSV. The similarity column is empty before the
/// early mask exists.
pub fn write_metrics_csv(out: impl Write, history: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for r in history {
        w.write_record([
            r.step.to_string(),
            r.loss.to_string(),
            r.sparsity_ratio.to_string(),
            r.mask_similarity_to_early
                .map(|v| v.to_string())
                .unwrap_or_default(),
            r.relative_norm_gap.to_string(),
            r.reg24_value.to_string(),
            r.regw0_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const CHECKPOINT_MAGIC: [u8; 4] = *b"NMCK";
const CHECKPOINT_VERSION: u32 = 1;

/// Checkpoint: magic `NMCK`, version `u32`, step `u64`, layer count `u32`,
/// then each layer as a weight tensor file.
pub fn write_checkpoint(out: &mut impl Write, step: u64, layers: &[WeightTensor]) -> Result<()> {
    out.write_all(&CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&step.to_le_bytes())?;
    out.write_all(&(layers.len() as u32).to_le_bytes())?;
    for l in layers {
        write_weights(out, l)?;
    }
    Ok(())
}

pub fn read_checkpoint(input: &mut impl Read) -> Result<(u64, Vec<WeightTensor>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint".into()));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != CHECKPOINT_VERSION {
        return Err(Error::Format("unsupported checkpoint version".into()));
    }
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b8)?;
    let step = u64::from_le_bytes(b8);
    input.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    let layers = (0..n)
        .map(|_| read_weights(input))
        .collect::<Result<Vec<_>>>()?;
    Ok((step, layers))
}
