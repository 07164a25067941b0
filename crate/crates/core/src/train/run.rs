use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{lr_at, TrainConfig};
use super::optim::GradStepper;
use crate::error::{Error, Result};
use crate::model::{loss_and_grad, mse, CalibSet, ToyModel};
use crate::tensor::{
    apply_mask_snap, mask_similarity, project_24, prox_map, reg24_total, regw0_value,
    relative_norm_gap, sparsity_ratio_24, MaskTensor, RegW0Params, WeightTensor,
};

/// Diagnostics recorded at a training snapshot. Tensor-valued quantities
/// are aggregated over every layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub step: usize,
    /// Calibration loss of the current (unprojected) iterate.
    pub loss: f64,
    pub sparsity_ratio: f64,
    /// Agreement between the current projected mask and the early mask;
    /// absent until the early mask has been captured.
    pub mask_similarity_to_early: Option<f64>,
    pub relative_norm_gap: f64,
    pub reg24_value: f64,
    pub regw0_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// `W0 ⊙ mask`, per layer.
    pub final_weights: Vec<WeightTensor>,
    pub masks: Vec<MaskTensor>,
    /// Last iterate before projection and snapping.
    pub last_iterate: Vec<WeightTensor>,
    pub early_masks: Option<Vec<MaskTensor>>,
    pub history: Vec<MetricsRecord>,
    pub unconverged_prox_blocks: usize,
    pub total_steps: usize,
}

impl TrainResult {
    pub fn final_model(&self, like: &ToyModel) -> Result<ToyModel> {
        like.with_layers(self.final_weights.clone())
    }

    pub fn combined_mask(&self) -> MaskTensor {
        MaskTensor::concat_blocks(&self.masks)
    }

    /// Fraction of weights removed by the final masks.
    pub fn removed_fraction(&self) -> f64 {
        let m = self.combined_mask();
        1.0 - m.kept() as f64 / m.bits().len() as f64
    }

    /// 2:4 block ratio of the last iterate (exact zeros).
    pub fn pre_projection_sparsity(&self) -> f64 {
        sparsity_ratio_24(&WeightTensor::concat_blocks(&self.last_iterate), 0.0)
    }

    /// Similarity between the early and final masks, if the early mask was
    /// captured.
    pub fn early_final_similarity(&self) -> Option<f64> {
        let early = self.early_masks.as_ref()?;
        mask_similarity(&MaskTensor::concat_blocks(early), &self.combined_mask()).ok()
    }
}

fn reset_top2_to_initial(v: &WeightTensor, w0: &WeightTensor) -> Result<WeightTensor> {
    let keep = project_24(v);
    let data = v
        .data()
        .iter()
        .zip(w0.data())
        .zip(keep.bits())
        .map(|((&vi, &w0i), &k)| if k { w0i } else { vi })
        .collect();
    WeightTensor::new(v.rows(), v.cols(), data)
}

fn hard_project(v: &WeightTensor) -> Result<WeightTensor> {
    apply_mask_snap(v, &project_24(v))
}

struct Snapshotter<'a> {
    w0: WeightTensor,
    regw0: RegW0Params,
    data: &'a CalibSet,
    model: &'a ToyModel,
}

impl Snapshotter<'_> {
    fn record(
        &self,
        step: usize,
        layers: &[WeightTensor],
        early: Option<&MaskTensor>,
    ) -> Result<MetricsRecord> {
        let w = WeightTensor::concat_blocks(layers);
        let mask = project_24(&w);
        Ok(MetricsRecord {
            step,
            loss: mse(&self.model.with_layers(layers.to_vec())?, self.data)?,
            sparsity_ratio: sparsity_ratio_24(&w, 0.0),
            mask_similarity_to_early: early.map(|e| mask_similarity(e, &mask)).transpose()?,
            relative_norm_gap: relative_norm_gap(&w, &self.w0, &mask).unwrap_or(0.0),
            reg24_value: reg24_total(&w),
            regw0_value: regw0_value(&w, &self.w0, &self.regw0)?,
        })
    }
}

/// Proximal gradient training of a 2:4 mask for `model`, whose current
/// weights are the frozen initial weights `W0`.
///
/// Each step takes a (stochastic) gradient step on the loss plus the
/// frozen-weight regularizer, then the constraint step of the configured
/// arm. The returned weights are `W0` masked by the magnitude projection of
/// the last iterate.
pub fn train(model: &ToyModel, data: &CalibSet, cfg: &TrainConfig) -> Result<TrainResult> {
    train_observed(model, data, cfg, |_, _| {})
}

/// [`train`], calling `observe(step, layers)` with the iterate after every
/// step.
pub fn train_observed(
    model: &ToyModel,
    data: &CalibSet,
    cfg: &TrainConfig,
    mut observe: impl FnMut(usize, &[WeightTensor]),
) -> Result<TrainResult> {
    cfg.validate(data.len())?;
    let prox = cfg.prox_params()?;
    let w0: Vec<WeightTensor> = model.layers().to_vec();
    let mut w = w0.clone();
    let mut stepper = GradStepper::new(cfg, &w0)?;
    let snap = Snapshotter {
        w0: WeightTensor::concat_blocks(&w0),
        regw0: cfg.regw0_params()?,
        data,
        model,
    };

    let n = data.len();
    let total = cfg.total_steps(n);
    let early_at = ((cfg.early_mask_fraction * total as f64).ceil() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    let mut early: Option<Vec<MaskTensor>> = None;
    let mut early_combined: Option<MaskTensor> = None;
    let mut unconverged = 0;
    let mut initial_loss = None;
    let mut step = 0;

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let lr = lr_at(step, total, cfg);
            let student = model.with_layers(w.clone())?;
            let (loss, grads) = match loss_and_grad(&student, data, batch) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => {
                    return Err(Error::Diverged {
                        step,
                        loss: f64::NAN,
                        history,
                    })
                }
                Err(e) => return Err(e),
            };
            let reference = *initial_loss.get_or_insert(loss);
            if loss > cfg.divergence_factor * reference.max(1e-6) {
                return Err(Error::Diverged {
                    step,
                    loss,
                    history,
                });
            }

            let lambda = if cfg.scale_prox_by_lr {
                lr * cfg.lambda1
            } else {
                cfg.lambda1
            };
            for l in 0..w.len() {
                let v = match stepper.grad_step(l, &w[l], &w0[l], &grads[l], step, lr) {
                    Ok(v) => v,
                    Err(Error::NonFiniteGradient { .. }) => {
                        return Err(Error::Diverged {
                            step,
                            loss,
                            history,
                        })
                    }
                    Err(e) => return Err(e),
                };
                let sparse = if cfg.arm.hard_sparsity() {
                    hard_project(&v)?
                } else {
                    let (out, diag) = prox_map(&v, lambda, &prox)?;
                    unconverged += diag.unconverged_blocks;
                    out
                };
                w[l] = if cfg.arm.hard_frozen() {
                    reset_top2_to_initial(&sparse, &w0[l])?
                } else {
                    sparse
                };
            }
            step += 1;
            observe(step, &w);

            if early.is_none() && step >= early_at {
                let masks: Vec<MaskTensor> = w.iter().map(project_24).collect();
                early_combined = Some(MaskTensor::concat_blocks(&masks));
                early = Some(masks);
            }
            if step % cfg.snapshot_every == 0 || step == total {
                history.push(snap.record(step, &w, early_combined.as_ref())?);
            }
        }
    }

    let masks: Vec<MaskTensor> = w.iter().map(project_24).collect();
    let final_weights = w0
        .iter()
        .zip(&masks)
        .map(|(w0, m)| apply_mask_snap(w0, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainResult {
        final_weights,
        masks,
        last_iterate: w,
        early_masks: early,
        history,
        unconverged_prox_blocks: unconverged,
        total_steps: total,
    })
}
