use super::config::{OptimizerKind, TrainConfig};
use crate::error::{Error, Result};
use crate::tensor::{regw0_grad, RegW0Params, WeightTensor};

/// Gradient half of one outer step, with per-layer optimizer state.
#[derive(Debug, Clone)]
pub struct GradStepper {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    regw0: RegW0Params,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl GradStepper {
    pub fn new(cfg: &TrainConfig, layers: &[WeightTensor]) -> Result<Self> {
        Ok(GradStepper {
            kind: cfg.optimizer,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps_opt,
            weight_decay: cfg.weight_decay,
            regw0: cfg.regw0_params()?,
            first: layers.iter().map(|w| vec![0.0; w.len()]).collect(),
            second: layers.iter().map(|w| vec![0.0; w.len()]).collect(),
        })
    }

    /// `V = W - lr * (g + lambda2 * grad Reg_W0(W))`, the bracket being
    /// preconditioned by the moment estimates when the adaptive optimizer is
    /// selected. `step` counts from zero.
    pub fn grad_step(
        &mut self,
        layer: usize,
        w: &WeightTensor,
        w0: &WeightTensor,
        grad_loss: &WeightTensor,
        step: usize,
        lr: f64,
    ) -> Result<WeightTensor> {
        w.check_same_shape(w0)?;
        w.check_same_shape(grad_loss)?;
        if grad_loss.data().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { step });
        }
        let lambda2 = self.regw0.lambda2;
        let mut g: Vec<f64> = grad_loss.data().to_vec();
        if lambda2 > 0.0 {
            let r = regw0_grad(w, w0, &self.regw0)?;
            for (gi, ri) in g.iter_mut().zip(r.data()) {
                *gi += lambda2 * ri;
            }
        }

        let data = match self.kind {
            OptimizerKind::PlainSgd => w
                .data()
                .iter()
                .zip(&g)
                .map(|(wi, gi)| wi - lr * gi)
                .collect(),
            OptimizerKind::AdaptiveMoments => {
                let t = (step + 1) as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                let (m, v) = (&mut self.first[layer], &mut self.second[layer]);
                w.data()
                    .iter()
                    .zip(&g)
                    .zip(m.iter_mut().zip(v.iter_mut()))
                    .map(|((&wi, &gi), (mi, vi))| {
                        *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                        *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                        let dir = (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
                        wi - lr * (dir + self.weight_decay * wi)
                    })
                    .collect()
            }
        };
        WeightTensor::new(w.rows(), w.cols(), data).map_err(|_| Error::NonFiniteGradient { step })
    }
}
