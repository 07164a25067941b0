//! Teacher/student pruning task shared by the CLI and the acceptance
//! suite: a dense teacher plays the pretrained model, noiseless calibration
//! data drives mask learning, and held-out data measures the masked model.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{magnitude_24, wanda_24, ActivationStats};
use crate::error::{Error, Result};
use crate::model::{
    gen_calibration_with, gen_teacher, mse, CalibSet, InputSpec, ModelDims, ModelKind, ToyModel,
};
use crate::tensor::{apply_mask_snap, MaskTensor};
use crate::train::{TrainConfig, TrainResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub model: ModelKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub n_calib: usize,
    pub n_test: usize,
    /// Input feature scales are drawn log-uniformly from this range.
    pub min_scale: f64,
    pub max_scale: f64,
    pub group_correlation: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            model: ModelKind::Linear,
            input_dim: 64,
            hidden_dim: 64,
            output_dim: 32,
            n_calib: 400,
            n_test: 2000,
            min_scale: 0.25,
            max_scale: 4.0,
            group_correlation: 0.0,
        }
    }
}

impl TaskConfig {
    pub const KEYS: [&'static str; 9] = [
        "model",
        "input_dim",
        "hidden_dim",
        "output_dim",
        "n_calib",
        "n_test",
        "min_scale",
        "max_scale",
        "group_correlation",
    ];

    pub fn dims(&self) -> ModelDims {
        match self.model {
            ModelKind::Linear => ModelDims::linear(self.input_dim, self.output_dim),
            ModelKind::Mlp2 => ModelDims::mlp2(self.input_dim, self.hidden_dim, self.output_dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        if dims
            .layer_shapes()
            .iter()
            .any(|&(r, c)| r == 0 || c == 0 || c % 4 != 0)
        {
            return Err(Error::Config(
                "layer input dimensions must be positive multiples of 4".into(),
            ));
        }
        if self.n_calib == 0 || self.n_test == 0 {
            return Err(Error::Config("`n_calib` and `n_test` must be >= 1".into()));
        }
        Ok(())
    }
}

/// A training configuration together with the task it runs on, read from
/// one flat JSON object.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    /// Unknown keys are rejected; syntax errors report line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        let serde_json::Value::Object(mut all) = value else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let mut task = serde_json::Map::new();
        for key in TaskConfig::KEYS {
            if let Some(v) = all.remove(key) {
                task.insert(key.to_string(), v);
            }
        }
        let task: TaskConfig = serde_json::from_value(task.into())
            .map_err(|e| Error::Config(format!("task settings: {e}")))?;
        let train: TrainConfig = serde_json::from_value(all.into())
            .map_err(|e| Error::Config(format!("training settings: {e}")))?;
        task.validate()?;
        Ok(ExperimentConfig { task, train })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut obj = serde_json::Map::new();
        for v in [
            serde_json::to_value(&self.task),
            serde_json::to_value(&self.train),
        ] {
            if let serde_json::Value::Object(m) = v.map_err(|e| Error::Config(e.to_string()))? {
                obj.extend(m);
            }
        }
        serde_json::to_string_pretty(&obj).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Generated teacher, calibration and test data for one seed.
#[derive(Debug, Clone)]
pub struct Task {
    pub teacher: ToyModel,
    pub calib: CalibSet,
    pub test: CalibSet,
    pub inputs: InputSpec,
}

impl Task {
    pub fn generate(cfg: &TaskConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let teacher = gen_teacher(seeds.next_u64(), &cfg.dims())?;
        let inputs = InputSpec::log_uniform_scales(
            cfg.input_dim,
            cfg.min_scale,
            cfg.max_scale,
            cfg.group_correlation,
            seeds.next_u64(),
        )?;
        let calib = gen_calibration_with(&teacher, seeds.next_u64(), cfg.n_calib, &inputs)?;
        let test = gen_calibration_with(&teacher, seeds.next_u64(), cfg.n_test, &inputs)?;
        Ok(Task {
            teacher,
            calib,
            test,
            inputs,
        })
    }

    /// Test MSE of the teacher with every layer masked and snapped.
    pub fn masked_test_mse(&self, masks: &[MaskTensor]) -> Result<f64> {
        if masks.len() != self.teacher.layers().len() {
            return Err(Error::InvalidParam("one mask per layer required".into()));
        }
        let layers = self
            .teacher
            .layers()
            .iter()
            .zip(masks)
            .map(|(w, m)| apply_mask_snap(w, m))
            .collect::<Result<Vec<_>>>()?;
        mse(&self.teacher.with_layers(layers)?, &self.test)
    }

    pub fn magnitude_masks(&self) -> Vec<MaskTensor> {
        self.teacher.layers().iter().map(magnitude_24).collect()
    }

    pub fn wanda_masks(&self) -> Result<Vec<MaskTensor>> {
        let stats = ActivationStats::for_model(&self.teacher, &self.calib)?;
        self.teacher
            .layers()
            .iter()
            .zip(&stats)
            .map(|(w, s)| wanda_24(w, s))
            .collect()
    }

    pub fn compare(&self, result: &TrainResult) -> Result<MaskComparison> {
        Ok(MaskComparison {
            dense: mse(&self.teacher, &self.test)?,
            learned: self.masked_test_mse(&result.masks)?,
            magnitude: self.masked_test_mse(&self.magnitude_masks())?,
            wanda: self.masked_test_mse(&self.wanda_masks()?)?,
        })
    }
}

/// Held-out MSE of the dense teacher and of each 2:4 mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskComparison {
    pub dense: f64,
    pub learned: f64,
    pub magnitude: f64,
    pub wanda: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_split_and_unknown_keys() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model": "mlp2", "hidden_dim": 16, "lambda1": 0.5, "epochs": 3, "seed": 9}"#,
        )
        .unwrap();
        assert_eq!(cfg.task.model, ModelKind::Mlp2);
        assert_eq!(cfg.task.hidden_dim, 16);
        assert_eq!(cfg.train.lambda1, 0.5);
        assert_eq!(cfg.train.seed, 9);

        let err = ExperimentConfig::from_json(r#"{"lambda_1": 0.5}"#).unwrap_err();
        assert!(err.to_string().contains("lambda_1"), "{err}");
        let err = ExperimentConfig::from_json("{\n\"lambda1\": 0.5,,\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ExperimentConfig::from_json(r#"{"input_dim": 6}"#).is_err());

        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn task_is_seeded() {
        let cfg = TaskConfig {
            n_calib: 8,
            n_test: 8,
            ..TaskConfig::default()
        };
        let a = Task::generate(&cfg, 1).unwrap();
        let b = Task::generate(&cfg, 1).unwrap();
        assert_eq!(a.teacher, b.teacher);
        assert_eq!(a.calib, b.calib);
        assert_ne!(a.teacher, Task::generate(&cfg, 2).unwrap().teacher);
        assert_eq!(mse(&a.teacher, &a.test).unwrap(), 0.0);
    }
}
