use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::ProxParams;
use crate::tensor::RegW0Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    PlainSgd,
    /// Bias-corrected first/second moment preconditioning with decoupled
    /// weight decay.
    AdaptiveMoments,
}

/// How the two structural constraints are enforced during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintArm {
    /// Both constraints relaxed into regularizers; the plain outer loop.
    SoftBoth,
    /// Magnitude projection to 2:4 after every step instead of the prox.
    HardSparsity,
    /// The two largest-magnitude weights of each block are reset to their
    /// initial values after every step.
    HardFrozen,
    /// Both of the above.
    HardBoth,
}

impl ConstraintArm {
    pub const ALL: [ConstraintArm; 4] = [
        ConstraintArm::SoftBoth,
        ConstraintArm::HardSparsity,
        ConstraintArm::HardFrozen,
        ConstraintArm::HardBoth,
    ];

    pub fn hard_sparsity(self) -> bool {
        matches!(self, ConstraintArm::HardSparsity | ConstraintArm::HardBoth)
    }

    pub fn hard_frozen(self) -> bool {
        matches!(self, ConstraintArm::HardFrozen | ConstraintArm::HardBoth)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintArm::SoftBoth => "soft_both",
            ConstraintArm::HardSparsity => "hard_sparsity",
            ConstraintArm::HardFrozen => "hard_frozen",
            ConstraintArm::HardBoth => "hard_both",
        }
    }
}

/// The four constraint-ablation variants of `cfg`.
pub fn ablation_arms(cfg: &TrainConfig) -> Vec<(ConstraintArm, TrainConfig)> {
    ConstraintArm::ALL
        .iter()
        .map(|&arm| (arm, TrainConfig { arm, ..cfg.clone() }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub peak_lr: f64,
    pub warmup_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_opt: f64,
    pub weight_decay: f64,
    pub prox_eps: f64,
    pub prox_max_iters: usize,
    pub regw0_epsilon: f64,
    /// Record metrics every this many steps (and always at the end).
    pub snapshot_every: usize,
    pub arm: ConstraintArm,
    /// Use `lr * lambda1` as the prox strength instead of `lambda1`.
    pub scale_prox_by_lr: bool,
    /// Abort once the loss exceeds this multiple of the initial loss.
    pub divergence_factor: f64,
    /// Fraction of training after which the early mask is captured.
    pub early_mask_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 0.1,
            lambda2: 0.0,
            peak_lr: 0.3,
            warmup_ratio: 0.1,
            epochs: 50,
            batch_size: 40,
            seed: 42,
            optimizer: OptimizerKind::PlainSgd,
            beta1: 0.9,
            beta2: 0.999,
            eps_opt: 1e-8,
            weight_decay: 0.0,
            prox_eps: ProxParams::TRAIN_EPS,
            prox_max_iters: ProxParams::DEFAULT_MAX_ITERS,
            regw0_epsilon: RegW0Params::DEFAULT_EPSILON,
            snapshot_every: 10,
            arm: ConstraintArm::SoftBoth,
            scale_prox_by_lr: false,
            divergence_factor: 1e6,
            early_mask_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{e} (line {}, column {})", e.line(), e.column())))
    }

    pub fn steps_per_epoch(&self, n_samples: usize) -> usize {
        n_samples.div_ceil(self.batch_size.max(1))
    }

    pub fn total_steps(&self, n_samples: usize) -> usize {
        self.epochs * self.steps_per_epoch(n_samples)
    }

    pub fn warmup_steps(&self, total_steps: usize) -> usize {
        (self.warmup_ratio * total_steps as f64).ceil() as usize
    }

    pub fn prox_params(&self) -> Result<ProxParams> {
        ProxParams::new(self.lambda1, self.prox_eps, self.prox_max_iters)
    }

    pub fn regw0_params(&self) -> Result<RegW0Params> {
        RegW0Params::new(self.regw0_epsilon, self.lambda2)
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("`{key}`: {why}")));
        let non_negative = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("peak_lr", self.peak_lr),
            ("weight_decay", self.weight_decay),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(key, "must be finite and >= 0");
            }
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return bad("warmup_ratio", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.early_mask_fraction) {
            return bad("early_mask_fraction", "must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1/beta2", "must lie in [0, 1)");
        }
        if !(self.eps_opt > 0.0) {
            return bad("eps_opt", "must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be >= 1");
        }
        if self.batch_size == 0 || self.batch_size > n_samples {
            return bad("batch_size", "must be between 1 and the number of samples");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every", "must be >= 1");
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence_factor", "must be > 1");
        }
        self.prox_params()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.regw0_params()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Linear warmup from 0 to `peak_lr`, then linear decay to 0 at
/// `total_steps`.
pub fn lr_at(step: usize, total_steps: usize, cfg: &TrainConfig) -> f64 {
    let warmup = cfg.warmup_steps(total_steps);
    if step < warmup {
        cfg.peak_lr * step as f64 / warmup as f64
    } else if total_steps > warmup {
        cfg.peak_lr * (total_steps.saturating_sub(step)) as f64 / (total_steps - warmup) as f64
    } else {
        cfg.peak_lr
    }
}
