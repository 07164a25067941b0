use crate::error::{Error, Result};

/// One aligned group of four consecutive weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block4([f64; 4]);

impl Block4 {
    pub fn new(w: [f64; 4]) -> Result<Self> {
        if w.iter().all(|v| v.is_finite()) {
            Ok(Block4(w))
        } else {
            Err(Error::NonFinite("block"))
        }
    }

    pub fn from_slice(w: &[f64]) -> Result<Self> {
        let arr: [f64; 4] = w
            .try_into()
            .map_err(|_| Error::InvalidParam(format!("block needs 4 entries, got {}", w.len())))?;
        Self::new(arr)
    }

    #[inline]
    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn reg24(&self) -> f64 {
        reg24_unchecked(&self.0)
    }

    pub fn nonzeros(&self) -> usize {
        count_nonzeros(&self.0)
    }
}

impl From<Block4> for [f64; 4] {
    fn from(b: Block4) -> Self {
        b.0
    }
}

/// Magnitudes of a block sorted in descending order together with what is
/// needed to map a sorted-coordinate vector back to the original layout.
///
/// Ties are broken by original position (lower index first) and the sign of
/// an exact zero is taken as `+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortedBlock {
    z: [f64; 4],
    signs: [f64; 4],
    idx: [usize; 4],
}

impl SortedBlock {
    pub fn from_block(y: &Block4) -> Self {
        let y = y.as_array();
        let mut idx = [0usize, 1, 2, 3];
        // stable: equal magnitudes keep ascending original index
        idx.sort_by(|&a, &b| y[b].abs().total_cmp(&y[a].abs()));
        let signs = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = idx.map(|i| y[i].abs());
        SortedBlock { z, signs, idx }
    }

    /// Sorted magnitudes `z1 >= z2 >= z3 >= z4 >= 0`.
    #[inline]
    pub fn z(&self) -> &[f64; 4] {
        &self.z
    }

    /// Signs in original coordinate order.
    pub fn signs(&self) -> &[f64; 4] {
        &self.signs
    }

    /// `idx[k]` is the original position of sorted position `k`.
    pub fn idx(&self) -> &[usize; 4] {
        &self.idx
    }

    /// Maps a vector expressed in sorted coordinates back to the original
    /// order and restores signs.
    pub fn restore(&self, w_sorted: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, &orig) in self.idx.iter().enumerate() {
            out[orig] = self.signs[orig] * w_sorted[k];
        }
        out
    }
}

#[inline]
pub(crate) fn reg24_unchecked(w: &[f64; 4]) -> f64 {
    let [a, b, c, d] = w.map(f64::abs);
    a * b * c + b * c * d + c * d * a + d * a * b
}

#[inline]
pub(crate) fn count_nonzeros(w: &[f64; 4]) -> usize {
    w.iter().filter(|v| **v != 0.0).count()
}

/// The 2:4 regularizer on one block: the sum of absolute products over all
/// triples of coordinates. Zero exactly when at most two entries are nonzero.
pub fn reg24_block(w: &[f64; 4]) -> Result<f64> {
    Ok(Block4::new(*w)?.reg24())
}

/// `max(z - alpha, 0)` for `z, alpha >= 0`.
#[inline]
pub fn soft_threshold(z: f64, alpha: f64) -> f64 {
    debug_assert!(z >= 0.0 && alpha >= 0.0);
    (z - alpha).max(0.0)
}

/// `0.5 * ||w - y||^2 + lambda * reg24(w)`.
#[inline]
pub fn prox_objective(w: &[f64; 4], y: &[f64; 4], lambda: f64) -> f64 {
    let mut sq = 0.0;
    for i in 0..4 {
        let d = w[i] - y[i];
        sq += d * d;
    }
    0.5 * sq + lambda * reg24_unchecked(w)
}

/// Parameters of the blockwise prox solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxParams {
    pub lambda: f64,
    pub eps_alm: f64,
    pub max_iters: usize,
}

impl ProxParams {
    pub const BENCH_EPS: f64 = 1e-10;
    pub const TRAIN_EPS: f64 = 1e-6;
    pub const DEFAULT_MAX_ITERS: usize = 100_000;

    pub fn new(lambda: f64, eps_alm: f64, max_iters: usize) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        if !(eps_alm > 0.0) {
            return Err(Error::InvalidParam(format!(
                "eps_alm must be > 0, got {eps_alm}"
            )));
        }
        if max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be >= 1".into()));
        }
        Ok(ProxParams {
            lambda,
            eps_alm,
            max_iters,
        })
    }

    /// Tight tolerance used by the solver benchmark.
    pub fn bench(lambda: f64) -> Result<Self> {
        Self::new(lambda, Self::BENCH_EPS, Self::DEFAULT_MAX_ITERS)
    }

    /// Looser tolerance used inside the training loop.
    pub fn training(lambda: f64) -> Result<Self> {
        Self::new(lambda, Self::TRAIN_EPS, Self::DEFAULT_MAX_ITERS)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        ProxParams { lambda, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CandidateKind {
    TwoSparse,
    ThreeSparse,
    Dense,
}

impl CandidateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CandidateKind::TwoSparse => "two_sparse",
            CandidateKind::ThreeSparse => "three_sparse",
            CandidateKind::Dense => "dense",
        }
    }

    pub(crate) fn from_nonzeros(n: usize) -> Self {
        match n {
            0..=2 => CandidateKind::TwoSparse,
            3 => CandidateKind::ThreeSparse,
            _ => CandidateKind::Dense,
        }
    }
}

impl std::fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Solution of the blockwise prox problem in original coordinate order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSolution {
    pub w: [f64; 4],
    pub objective: f64,
    pub candidate_kind: CandidateKind,
    /// Inner iterations spent (sweeps for ALM, gradient steps for PGD).
    pub iters: usize,
    pub converged: bool,
}

impl ProxSolution {
    pub fn nonzeros(&self) -> usize {
        count_nonzeros(&self.w)
    }
}
