//! Brute-force reference for the blockwise prox.
//!
//! Every one of the 16 supports is solved separately in the original
//! coordinate order: a grid over all but one active coordinate (the last one
//! is minimized in closed form, the objective being a convex quadratic in any
//! single coordinate), then coordinate-descent polish from the best grid
//! points. Nothing here relies on sorting or on the three-candidate
//! structure used by the fast solvers.

use super::block::{CandidateKind, ProxSolution};
use super::Block4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Grid points per gridded coordinate, indexed by the number of gridded
    /// coordinates (support size minus one).
    pub grid_points: [usize; 4],
    /// Number of best grid points polished.
    pub starts: usize,
    pub polish_tol: f64,
    pub polish_max_sweeps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grid_points: [1, 1001, 121, 31],
            starts: 4,
            polish_tol: 1e-12,
            polish_max_sweeps: 1_000_000,
        }
    }
}

fn objective(w: &[f64; 4], a: &[f64; 4], lambda: f64) -> f64 {
    let mut sq = 0.0;
    for i in 0..4 {
        sq += (w[i] - a[i]) * (w[i] - a[i]);
    }
    let p = [
        w[0] * w[1] * w[2],
        w[1] * w[2] * w[3],
        w[2] * w[3] * w[0],
        w[3] * w[0] * w[1],
    ];
    0.5 * sq + lambda * p.iter().map(|v| v.abs()).sum::<f64>()
}

/// Exact minimizer of the objective in coordinate `i` over `w_i >= 0` with
/// every other coordinate held fixed.
fn coordinate_min(w: &[f64; 4], a: &[f64; 4], lambda: f64, i: usize) -> f64 {
    let mut cross = 0.0;
    for j in 0..4 {
        for k in (j + 1)..4 {
            if j != i && k != i {
                cross += w[j] * w[k];
            }
        }
    }
    (a[i] - lambda * cross).max(0.0)
}

fn polish(
    mut w: [f64; 4],
    active: &[usize],
    a: &[f64; 4],
    lambda: f64,
    cfg: &OracleConfig,
) -> [f64; 4] {
    for _ in 0..cfg.polish_max_sweeps {
        let mut moved = 0.0;
        for &i in active {
            let next = coordinate_min(&w, a, lambda, i);
            moved += (next - w[i]) * (next - w[i]);
            w[i] = next;
        }
        if moved.sqrt() <= cfg.polish_tol {
            break;
        }
    }
    w
}

/// Keeps the `cap` lowest-objective points seen so far.
struct BestSet {
    items: Vec<(f64, [f64; 4])>,
    cap: usize,
}

impl BestSet {
    fn offer(&mut self, obj: f64, w: [f64; 4]) {
        if self.items.len() < self.cap {
            self.items.push((obj, w));
        } else if let Some((worst, _)) = self
            .items
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .map(|(k, v)| (k, v.0))
        {
            if obj < self.items[worst].0 {
                self.items[worst] = (obj, w);
            }
        }
    }
}

fn solve_support(active: &[usize], a: &[f64; 4], lambda: f64, cfg: &OracleConfig) -> [f64; 4] {
    let mut w = [0.0; 4];
    let Some((&last, gridded)) = active.split_last() else {
        return w;
    };
    let n = cfg.grid_points[gridded.len()].max(2);
    let mut best = BestSet {
        items: Vec::with_capacity(cfg.starts),
        cap: cfg.starts.max(1),
    };
    let total = n.pow(gridded.len() as u32);
    for flat in 0..total {
        let mut rem = flat;
        for &g in gridded {
            let t = rem % n;
            rem /= n;
            w[g] = a[g] * t as f64 / (n - 1) as f64;
        }
        w[last] = coordinate_min(&w, a, lambda, last);
        best.offer(objective(&w, a, lambda), w);
    }
    best.items
        .iter()
        .map(|(_, start)| polish(*start, active, a, lambda, cfg))
        .min_by(|x, y| objective(x, a, lambda).total_cmp(&objective(y, a, lambda)))
        .unwrap_or(w)
}

/// Reference prox solution with the default grid.
pub fn oracle_prox(y: &Block4, lambda: f64) -> ProxSolution {
    oracle_prox_with(y, lambda, &OracleConfig::default())
}

pub fn oracle_prox_with(y: &Block4, lambda: f64, cfg: &OracleConfig) -> ProxSolution {
    let y = y.as_array();
    // A coordinate of the minimizer never has the opposite sign of y (flipping
    // it lowers the residual and leaves the regularizer unchanged), so work
    // on magnitudes and restore signs at the end.
    let a = y.map(f64::abs);
    let mut best_w = [0.0; 4];
    let mut best_obj = objective(&best_w, &a, lambda);
    let mut active = Vec::with_capacity(4);
    for mask in 1u32..16 {
        active.clear();
        active.extend((0..4).filter(|i| mask & (1 << i) != 0));
        let w = solve_support(&active, &a, lambda, cfg);
        let obj = objective(&w, &a, lambda);
        if obj < best_obj {
            best_obj = obj;
            best_w = w;
        }
    }
    let w = std::array::from_fn(|i| if y[i] < 0.0 { -best_w[i] } else { best_w[i] });
    let nnz = w.iter().filter(|v: &&f64| **v != 0.0).count();
    ProxSolution {
        w,
        objective: objective(&w, y, lambda),
        candidate_kind: CandidateKind::from_nonzeros(nnz),
        iters: 0,
        converged: true,
    }
}

/// Reference minimizer with the nonzeros restricted to the coordinates in
/// `active` (original order, values of `y` may have any sign).
pub fn oracle_restricted(
    y: &Block4,
    lambda: f64,
    active: &[usize],
    cfg: &OracleConfig,
) -> [f64; 4] {
    let y = y.as_array();
    let a = y.map(f64::abs);
    let mut active: Vec<usize> = active.iter().copied().filter(|&i| i < 4).collect();
    active.sort_unstable();
    active.dedup();
    let w = solve_support(&active, &a, lambda, cfg);
    std::array::from_fn(|i| if y[i] < 0.0 { -w[i] } else { w[i] })
}
