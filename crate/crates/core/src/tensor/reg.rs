use super::WeightTensor;
use crate::error::{Error, Result};
use crate::prox::reg24_unchecked;

/// Parameters of the frozen-weight regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegW0Params {
    /// Guard added (with the sign of `w0`) to the denominator.
    pub epsilon: f64,
    pub lambda2: f64,
}

impl RegW0Params {
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(epsilon: f64, lambda2: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParam(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        if !(lambda2 >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "lambda2 must be >= 0, got {lambda2}"
            )));
        }
        Ok(RegW0Params { epsilon, lambda2 })
    }
}

impl Default for RegW0Params {
    fn default() -> Self {
        RegW0Params {
            epsilon: Self::DEFAULT_EPSILON,
            lambda2: 0.0,
        }
    }
}

/// Sum of the 2:4 regularizer over every block.
pub fn reg24_total(w: &WeightTensor) -> f64 {
    w.blocks()
        .map(|b| reg24_unchecked(&[b[0], b[1], b[2], b[3]]))
        .sum()
}

#[inline]
fn guarded_denominator(w0: f64, eps: f64) -> f64 {
    // symmetric sign so the guard also protects negative w0
    if w0 >= 0.0 {
        w0 + eps
    } else {
        w0 - eps
    }
}

/// `sum_i (w_i / (w0_i + eps*sgn(w0_i)) * (w_i - w0_i))^2`. Unscaled by
/// `lambda2`.
pub fn regw0_value(w: &WeightTensor, w0: &WeightTensor, p: &RegW0Params) -> Result<f64> {
    w.check_same_shape(w0)?;
    Ok(w.data()
        .iter()
        .zip(w0.data())
        .map(|(&w, &w0)| {
            let t = w / guarded_denominator(w0, p.epsilon) * (w - w0);
            t * t
        })
        .sum())
}

/// Coordinatewise gradient of [`regw0_value`]:
/// `2 * (w (w - w0) / d) * ((2w - w0) / d)` with `d` the guarded `w0`.
pub fn regw0_grad(w: &WeightTensor, w0: &WeightTensor, p: &RegW0Params) -> Result<WeightTensor> {
    w.zip_map(w0, |w, w0| {
        let d = guarded_denominator(w0, p.epsilon);
        2.0 * (w * (w - w0) / d) * ((2.0 * w - w0) / d)
    })
}
