//! Small teacher/student models and synthetic calibration data.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::WeightTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Mlp2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub kind: ModelKind,
    pub input: usize,
    /// Ignored for [`ModelKind::Linear`].
    pub hidden: usize,
    pub output: usize,
}

impl ModelDims {
    pub fn linear(input: usize, output: usize) -> Self {
        ModelDims {
            kind: ModelKind::Linear,
            input,
            hidden: 0,
            output,
        }
    }

    pub fn mlp2(input: usize, hidden: usize, output: usize) -> Self {
        ModelDims {
            kind: ModelKind::Mlp2,
            input,
            hidden,
            output,
        }
    }

    /// `(rows, cols)` of each layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        match self.kind {
            ModelKind::Linear => vec![(self.output, self.input)],
            ModelKind::Mlp2 => vec![(self.hidden, self.input), (self.output, self.hidden)],
        }
    }
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims::linear(64, 32)
    }
}

/// Bias-free feed-forward model: `W x` or `W2 tanh(W1 x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    kind: ModelKind,
    layers: Vec<WeightTensor>,
}

impl ToyModel {
    pub fn new(kind: ModelKind, layers: Vec<WeightTensor>) -> Result<Self> {
        let ok = match (kind, layers.as_slice()) {
            (ModelKind::Linear, [_]) => true,
            (ModelKind::Mlp2, [a, b]) => b.cols() == a.rows(),
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidParam(format!(
                "{} layers do not compose into a {kind:?} model",
                layers.len()
            )));
        }
        Ok(ToyModel { kind, layers })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn layers(&self) -> &[WeightTensor] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows()
    }

    /// Same architecture with different weights.
    pub fn with_layers(&self, layers: Vec<WeightTensor>) -> Result<Self> {
        for (new, old) in layers.iter().zip(&self.layers) {
            new.check_same_shape(old)?;
        }
        ToyModel::new(self.kind, layers)
    }

    /// Inputs seen by each layer for one sample (the raw input for the first
    /// layer, hidden activations after that), followed by the output.
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (l, w) in self.layers.iter().enumerate() {
            let mut out = matvec(w, acts.last().unwrap());
            if l + 1 < self.layers.len() {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).pop().unwrap()
    }

    /// Inputs to each layer for one sample.
    pub fn layer_inputs(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = self.forward_trace(x);
        acts.pop();
        acts
    }
}

fn matvec(w: &WeightTensor, x: &[f64]) -> Vec<f64> {
    let cols = w.cols();
    w.data()
        .chunks_exact(cols)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Dense teacher with i.i.d. `N(0, 1/fan_in)` weights.
pub fn gen_teacher(seed: u64, dims: &ModelDims) -> Result<ToyModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = dims
        .layer_shapes()
        .into_iter()
        .map(|(rows, cols)| {
            let scale = 1.0 / (cols as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            WeightTensor::new(rows, cols, data)
        })
        .collect::<Result<Vec<_>>>()?;
    ToyModel::new(dims.kind, layers)
}

/// Distribution of calibration inputs.
///
/// `x_j = s_j * (sqrt(1 - rho) * g_j + sqrt(rho) * u_{j/4})` with `g`, `u`
/// standard normal: feature scales `s` and a factor shared inside each
/// aligned group of four inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub scales: Vec<f64>,
    pub group_correlation: f64,
}

impl InputSpec {
    /// Standard normal inputs.
    pub fn isotropic(dim: usize) -> Self {
        InputSpec {
            scales: vec![1.0; dim],
            group_correlation: 0.0,
        }
    }

    /// Feature scales drawn log-uniformly from `[min_scale, max_scale]`.
    pub fn log_uniform_scales(
        dim: usize,
        min_scale: f64,
        max_scale: f64,
        group_correlation: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(min_scale > 0.0 && max_scale >= min_scale) {
            return Err(Error::InvalidParam(
                "need 0 < min_scale <= max_scale".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (min_scale.ln(), max_scale.ln());
        let scales = (0..dim)
            .map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp())
            .collect();
        let spec = InputSpec {
            scales,
            group_correlation,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.group_correlation) {
            return Err(Error::InvalidParam(
                "group_correlation must lie in [0, 1]".into(),
            ));
        }
        if self.scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParam("scales must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let rho = self.group_correlation;
        let (own, shared) = ((1.0 - rho).sqrt(), rho.sqrt());
        let mut factor = 0.0;
        for (j, s) in self.scales.iter().enumerate() {
            if j % 4 == 0 {
                factor = rng.sample::<f64, _>(StandardNormal);
            }
            let g: f64 = rng.sample(StandardNormal);
            out.push(s * (own * g + shared * factor));
        }
    }
}

/// Calibration or test samples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibSet {
    in_dim: usize,
    out_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    pub seed: u64,
}

impl CalibSet {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidParam("dimensions must be positive".into()));
        }
        if !inputs.len().is_multiple_of(in_dim)
            || !targets.len().is_multiple_of(out_dim)
            || inputs.len() / in_dim != targets.len() / out_dim
        {
            return Err(Error::InvalidParam(
                "inputs and targets disagree on sample count".into(),
            ));
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("calibration set"));
        }
        Ok(CalibSet {
            in_dim,
            out_dim,
            inputs,
            targets,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.in_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.in_dim..(i + 1) * self.in_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.out_dim..(i + 1) * self.out_dim]
    }

    /// One CSV row per sample: inputs `x0..` then targets `y0..`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.in_dim)
            .map(|j| format!("x{j}"))
            .chain((0..self.out_dim).map(|j| format!("y{j}")))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .input(i)
                .iter()
                .chain(self.target(i))
                .map(|v| format!("{v:e}"))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let in_dim = headers.iter().filter(|h| h.starts_with('x')).count();
        let out_dim = headers.iter().filter(|h| h.starts_with('y')).count();
        if in_dim + out_dim != headers.len() {
            return Err(Error::Format(
                "calibration CSV columns must be x* then y*".into(),
            ));
        }
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad number {field:?}")))?;
                if j < in_dim {
                    inputs.push(v);
                } else {
                    targets.push(v);
                }
            }
        }
        CalibSet::new(in_dim, out_dim, inputs, targets, 0)
    }
}

/// Noiseless calibration set with standard normal inputs.
pub fn gen_calibration(teacher: &ToyModel, seed: u64, n: usize) -> Result<CalibSet> {
    gen_calibration_with(teacher, seed, n, &InputSpec::isotropic(teacher.input_dim()))
}

pub fn gen_calibration_with(
    teacher: &ToyModel,
    seed: u64,
    n: usize,
    spec: &InputSpec,
) -> Result<CalibSet> {
    if n == 0 {
        return Err(Error::InvalidParam("need at least one sample".into()));
    }
    if spec.scales.len() != teacher.input_dim() {
        return Err(Error::InvalidParam(format!(
            "input spec has {} scales for input dimension {}",
            spec.scales.len(),
            teacher.input_dim()
        )));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n * teacher.input_dim());
    let mut targets = Vec::with_capacity(n * teacher.output_dim());
    for _ in 0..n {
        let start = inputs.len();
        spec.sample(&mut rng, &mut inputs);
        targets.extend(teacher.forward(&inputs[start..]));
    }
    CalibSet::new(
        teacher.input_dim(),
        teacher.output_dim(),
        inputs,
        targets,
        seed,
    )
}

/// Mean squared error over the given rows (mean over samples and outputs).
pub fn loss(model: &ToyModel, data: &CalibSet, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::InvalidParam("empty batch".into()));
    }
    let mut total = 0.0;
    for &i in rows {
        let pred = model.forward(data.input(i));
        total += pred
            .iter()
            .zip(data.target(i))
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
    }
    let l = total / (rows.len() * data.out_dim()) as f64;
    if !l.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok(l)
}

/// Mean squared error over every sample.
pub fn mse(model: &ToyModel, data: &CalibSet) -> Result<f64> {
    let rows: Vec<usize> = (0..data.len()).collect();
    loss(model, data, &rows)
}

/// Loss and exact gradient with respect to every layer.
pub fn loss_and_grad(
    model: &ToyModel,
    data: &CalibSet,
    rows: &[usize],
) -> Result<(f64, Vec<WeightTensor>)> {
    if rows.is_empty() {
        return Err(Error::InvalidParam("empty batch".into()));
    }
    if data.in_dim() != model.input_dim() || data.out_dim() != model.output_dim() {
        return Err(Error::InvalidParam(
            "data dimensions do not match model".into(),
        ));
    }
    let norm = (rows.len() * data.out_dim()) as f64;
    let layers = model.layers();
    let mut grads: Vec<Vec<f64>> = layers.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut total = 0.0;

    for &i in rows {
        let acts = model.forward_trace(data.input(i));
        let pred = &acts[acts.len() - 1];
        // dL/d(output of the current layer)
        let mut delta: Vec<f64> = pred
            .iter()
            .zip(data.target(i))
            .map(|(p, t)| {
                total += (p - t) * (p - t);
                2.0 * (p - t) / norm
            })
            .collect();

        for l in (0..layers.len()).rev() {
            let w = &layers[l];
            let input = &acts[l];
            let cols = w.cols();
            for (r, d) in delta.iter().enumerate() {
                let g = &mut grads[l][r * cols..(r + 1) * cols];
                for (gc, x) in g.iter_mut().zip(input) {
                    *gc += d * x;
                }
            }
            if l > 0 {
                // back through W then tanh; `input` is tanh of the pre-activation
                let mut back = vec![0.0; cols];
                for (row, d) in w.data().chunks_exact(cols).zip(&delta) {
                    for (b, wv) in back.iter_mut().zip(row) {
                        *b += wv * d;
                    }
                }
                for (b, h) in back.iter_mut().zip(input) {
                    *b *= 1.0 - h * h;
                }
                delta = back;
            }
        }
    }

    let l = total / norm;
    if !l.is_finite() {
        return Err(Error::NonFinite("activations"));
    }
    let grads = grads
        .into_iter()
        .zip(layers)
        .map(|(g, w)| WeightTensor::new(w.rows(), w.cols(), g))
        .collect::<Result<Vec<_>>>()?;
    Ok((l, grads))
}
