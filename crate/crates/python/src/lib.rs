//! Python bindings: block-level prox solvers, weight and mask tensors,
//! the tensor-level operators and the teacher/student experiment.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use prox24::experiment::{ExperimentConfig, Task};
use prox24::tensor;
use prox24::{
    Block4, CandidateKind, Error, MaskTensor, PgdConfig, ProxParams, ProxSolution, RegW0Params,
    SortedBlock, WeightTensor,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.is_validation() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for prox24::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn block(y: [f64; 4]) -> PyResult<Block4> {
    Block4::new(y).py()
}

#[pyclass(name = "ProxSolution", frozen)]
struct PyProxSolution {
    #[pyo3(get)]
    w: [f64; 4],
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    candidate_kind: &'static str,
    #[pyo3(get)]
    iters: usize,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl PyProxSolution {
    fn __repr__(&self) -> String {
        format!(
            "ProxSolution(w={:?}, objective={}, candidate_kind='{}', iters={}, converged={})",
            self.w,
            self.objective,
            self.candidate_kind,
            self.iters,
            if self.converged { "True" } else { "False" }
        )
    }
}

impl From<ProxSolution> for PyProxSolution {
    fn from(s: ProxSolution) -> Self {
        PyProxSolution {
            w: s.w,
            objective: s.objective,
            candidate_kind: s.candidate_kind.as_str(),
            iters: s.iters,
            converged: s.converged,
        }
    }
}

/// Row-major weights whose column count is a multiple of 4.
#[pyclass(name = "WeightTensor", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWeightTensor(WeightTensor);

#[pymethods]
impl PyWeightTensor {
    #[new]
    fn new(rows: usize, cols: usize, data: Vec<f64>) -> PyResult<Self> {
        WeightTensor::new(rows, cols, data).py().map(Self)
    }

    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err("rows have different lengths"));
        }
        let n = rows.len();
        WeightTensor::new(n, cols, rows.concat()).py().map(Self)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let mut f = BufReader::new(File::open(path)?);
        tensor::read_weights(&mut f).py().map(Self)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let mut f = BufWriter::new(File::create(path)?);
        tensor::write_weights(&mut f, &self.0).py()?;
        f.flush()?;
        Ok(())
    }

    #[getter]
    fn rows(&self) -> usize {
        self.0.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.0.cols()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    fn to_list(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0
            .data()
            .chunks(self.0.cols())
            .map(<[f64]>::to_vec)
            .collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __eq__(&self, other: PyRef<'_, Self>) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!(
            "WeightTensor(rows={}, cols={})",
            self.0.rows(),
            self.0.cols()
        )
    }
}

#[pyclass(name = "MaskTensor", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMaskTensor(MaskTensor);

#[pymethods]
impl PyMaskTensor {
    #[new]
    fn new(rows: usize, cols: usize, bits: Vec<bool>) -> PyResult<Self> {
        MaskTensor::new(rows, cols, bits).py().map(Self)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let mut f = BufReader::new(File::open(path)?);
        tensor::read_mask(&mut f).py().map(Self)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let mut f = BufWriter::new(File::create(path)?);
        tensor::write_mask(&mut f, &self.0).py()?;
        f.flush()?;
        Ok(())
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    fn to_list(&self) -> Vec<bool> {
        self.0.bits().to_vec()
    }

    fn kept(&self) -> usize {
        self.0.kept()
    }

    fn is_24_valid(&self) -> bool {
        self.0.is_24_valid()
    }

    fn __eq__(&self, other: PyRef<'_, Self>) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        let (r, c) = self.0.shape();
        format!("MaskTensor(rows={r}, cols={c}, kept={})", self.0.kept())
    }
}

#[pyfunction]
fn reg24_block(w: [f64; 4]) -> PyResult<f64> {
    prox24::reg24_block(&w).py()
}

#[pyfunction]
fn soft_threshold(z: f64, alpha: f64) -> f64 {
    prox24::soft_threshold(z, alpha)
}

#[pyfunction]
fn prox_objective(w: [f64; 4], y: [f64; 4], lam: f64) -> f64 {
    prox24::prox_objective(&w, &y, lam)
}

/// Blockwise prox by candidate enumeration with alternating minimization.
#[pyfunction]
#[pyo3(signature = (y, lam, eps=ProxParams::BENCH_EPS, max_iters=ProxParams::DEFAULT_MAX_ITERS))]
fn enum_alm(y: [f64; 4], lam: f64, eps: f64, max_iters: usize) -> PyResult<PyProxSolution> {
    let params = ProxParams::new(lam, eps, max_iters).py()?;
    Ok(prox24::enum_alm(&block(y)?, &params).into())
}

#[pyfunction]
fn enum_pgd(y: [f64; 4], lam: f64) -> PyResult<PyProxSolution> {
    Ok(prox24::enum_pgd(&block(y)?, lam, &PgdConfig::default()).into())
}

/// Brute-force reference prox (slow).
#[pyfunction]
fn oracle_prox(y: [f64; 4], lam: f64) -> PyResult<PyProxSolution> {
    Ok(prox24::oracle_prox(&block(y)?, lam).into())
}

#[pyfunction]
fn kkt_2sparse_threshold(y: [f64; 4]) -> PyResult<f64> {
    prox24::kkt_2sparse_threshold(&SortedBlock::from_block(&block(y)?)).py()
}

/// `(lambda, w, kind)` along `n` log-spaced strengths.
#[pyfunction]
#[pyo3(signature = (y, n=200, lambda_min=1e-3, lambda_max=10.0))]
fn reg_path(
    y: [f64; 4],
    n: usize,
    lambda_min: f64,
    lambda_max: f64,
) -> PyResult<Vec<(f64, [f64; 4], &'static str)>> {
    let grid = prox24::bench::log_grid(lambda_min, lambda_max, n).py()?;
    let rows = prox24::bench::reg_path(&block(y)?, &grid, ProxParams::BENCH_EPS).py()?;
    Ok(rows
        .into_iter()
        .map(|r| (r.lambda, r.w, CandidateKind::as_str(&r.kind)))
        .collect())
}

/// Returns the prox of every block and the number of blocks whose solver
/// hit the iteration cap.
#[pyfunction]
#[pyo3(signature = (w, lam, eps=ProxParams::TRAIN_EPS))]
fn prox_map(w: PyRef<'_, PyWeightTensor>, lam: f64, eps: f64) -> PyResult<(PyWeightTensor, usize)> {
    let params = ProxParams::new(lam, eps, ProxParams::DEFAULT_MAX_ITERS).py()?;
    let (out, diag) = tensor::prox_map(&w.0, lam, &params).py()?;
    Ok((PyWeightTensor(out), diag.unconverged_blocks))
}

#[pyfunction]
fn project_24(w: PyRef<'_, PyWeightTensor>) -> PyMaskTensor {
    PyMaskTensor(tensor::project_24(&w.0))
}

#[pyfunction]
fn apply_mask_snap(
    w0: PyRef<'_, PyWeightTensor>,
    mask: PyRef<'_, PyMaskTensor>,
) -> PyResult<PyWeightTensor> {
    tensor::apply_mask_snap(&w0.0, &mask.0)
        .py()
        .map(PyWeightTensor)
}

#[pyfunction]
fn reg24_total(w: PyRef<'_, PyWeightTensor>) -> f64 {
    tensor::reg24_total(&w.0)
}

#[pyfunction]
#[pyo3(signature = (w, w0, epsilon=RegW0Params::DEFAULT_EPSILON))]
fn regw0_value(
    w: PyRef<'_, PyWeightTensor>,
    w0: PyRef<'_, PyWeightTensor>,
    epsilon: f64,
) -> PyResult<f64> {
    let p = RegW0Params::new(epsilon, 1.0).py()?;
    tensor::regw0_value(&w.0, &w0.0, &p).py()
}

#[pyfunction]
#[pyo3(signature = (w, w0, epsilon=RegW0Params::DEFAULT_EPSILON))]
fn regw0_grad(
    w: PyRef<'_, PyWeightTensor>,
    w0: PyRef<'_, PyWeightTensor>,
    epsilon: f64,
) -> PyResult<PyWeightTensor> {
    let p = RegW0Params::new(epsilon, 1.0).py()?;
    tensor::regw0_grad(&w.0, &w0.0, &p).py().map(PyWeightTensor)
}

#[pyfunction]
#[pyo3(signature = (w, tau_zero=0.0))]
fn sparsity_ratio_24(w: PyRef<'_, PyWeightTensor>, tau_zero: f64) -> f64 {
    tensor::sparsity_ratio_24(&w.0, tau_zero)
}

#[pyfunction]
fn mask_similarity(a: PyRef<'_, PyMaskTensor>, b: PyRef<'_, PyMaskTensor>) -> PyResult<f64> {
    tensor::mask_similarity(&a.0, &b.0).py()
}

#[pyfunction]
fn magnitude_24(w0: PyRef<'_, PyWeightTensor>) -> PyMaskTensor {
    PyMaskTensor(prox24::baselines::magnitude_24(&w0.0))
}

/// Generates the teacher/student task, learns masks and compares them with
/// the baselines on held-out data. `config` is the same flat JSON object the
/// command-line `train` subcommand reads.
#[pyfunction]
#[pyo3(signature = (config=None, seed=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut exp = match config {
        Some(text) => ExperimentConfig::from_json(text).py()?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        exp.train.seed = s;
    }
    let (res, cmp) = py
        .detach(|| -> prox24::Result<_> {
            let task = Task::generate(&exp.task, exp.train.seed)?;
            let res = prox24::train::train(&task.teacher, &task.calib, &exp.train)?;
            let cmp = task.compare(&res)?;
            Ok((res, cmp))
        })
        .py()?;

    let test_mse = PyDict::new(py);
    test_mse.set_item("dense", cmp.dense)?;
    test_mse.set_item("learned", cmp.learned)?;
    test_mse.set_item("magnitude", cmp.magnitude)?;
    test_mse.set_item("wanda", cmp.wanda)?;

    let out = PyDict::new(py);
    out.set_item("seed", exp.train.seed)?;
    out.set_item("test_mse", test_mse)?;
    out.set_item("removed_fraction", res.removed_fraction())?;
    out.set_item("pre_projection_sparsity", res.pre_projection_sparsity())?;
    out.set_item("early_final_similarity", res.early_final_similarity())?;
    out.set_item("total_steps", res.total_steps)?;
    let masks: Vec<PyMaskTensor> = res.masks.iter().cloned().map(PyMaskTensor).collect();
    let weights: Vec<PyWeightTensor> = res
        .final_weights
        .iter()
        .cloned()
        .map(PyWeightTensor)
        .collect();
    out.set_item("masks", masks)?;
    out.set_item("final_weights", weights)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "prox24")]
fn prox24_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProxSolution>()?;
    m.add_class::<PyWeightTensor>()?;
    m.add_class::<PyMaskTensor>()?;
    m.add_function(wrap_pyfunction!(reg24_block, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(prox_objective, m)?)?;
    m.add_function(wrap_pyfunction!(enum_alm, m)?)?;
    m.add_function(wrap_pyfunction!(enum_pgd, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_prox, m)?)?;
    m.add_function(wrap_pyfunction!(kkt_2sparse_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(reg_path, m)?)?;
    m.add_function(wrap_pyfunction!(prox_map, m)?)?;
    m.add_function(wrap_pyfunction!(project_24, m)?)?;
    m.add_function(wrap_pyfunction!(apply_mask_snap, m)?)?;
    m.add_function(wrap_pyfunction!(reg24_total, m)?)?;
    m.add_function(wrap_pyfunction!(regw0_value, m)?)?;
    m.add_function(wrap_pyfunction!(regw0_grad, m)?)?;
    m.add_function(wrap_pyfunction!(sparsity_ratio_24, m)?)?;
    m.add_function(wrap_pyfunction!(mask_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(magnitude_24, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
