use super::alm::{pair_sum_excluding, select_candidate};
use super::block::{CandidateKind, ProxSolution, SortedBlock};
use super::Block4;

/// Projected gradient settings for [`enum_pgd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdConfig {
    pub max_iters: usize,
    /// Stop once the norm of the projected-gradient mapping drops below this.
    pub grad_tol: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig {
            max_iters: 10_000,
            grad_tol: 1e-8,
        }
    }
}

/// Overestimate of the gradient Lipschitz constant on the box `[0, z]`.
fn lipschitz(z: &[f64; 4], lambda: f64) -> f64 {
    let s: f64 = z.iter().sum();
    1.0 + 2.0 * lambda * s * s
}

/// Projected gradient descent on the restricted prox objective over the
/// nonnegative orthant. Returns `(w, iters, converged)`.
fn pgd(z: &[f64; 4], lambda: f64, support: usize, cfg: &PgdConfig) -> ([f64; 4], usize, bool) {
    let step = 1.0 / lipschitz(z, lambda);
    let mut w = [0.0; 4];
    w[..support].copy_from_slice(&z[..support]);
    let mut grad = [0.0; 4];
    for it in 1..=cfg.max_iters {
        for i in 0..support {
            grad[i] = (w[i] - z[i]) + lambda * pair_sum_excluding(&w, i);
        }
        let mut mapping_sq = 0.0;
        for i in 0..support {
            let next = (w[i] - step * grad[i]).max(0.0);
            let d = (w[i] - next) / step;
            mapping_sq += d * d;
            w[i] = next;
        }
        if mapping_sq.sqrt() < cfg.grad_tol {
            return (w, it, true);
        }
    }
    (w, cfg.max_iters, false)
}

/// Candidate enumeration with the 3-sparse and dense candidates computed by
/// projected gradient descent with step `1/L`.
pub fn enum_pgd(y: &Block4, lambda: f64, cfg: &PgdConfig) -> ProxSolution {
    let sb = SortedBlock::from_block(y);
    let z = sb.z();
    let two = [z[0], z[1], 0.0, 0.0];
    let (three, it3, ok3) = pgd(z, lambda, 3, cfg);
    let (dense, it4, ok4) = pgd(z, lambda, 4, cfg);
    select_candidate(
        &sb,
        y,
        lambda,
        [
            (two, CandidateKind::TwoSparse),
            (three, CandidateKind::ThreeSparse),
            (dense, CandidateKind::Dense),
        ],
        it3 + it4,
        ok3 && ok4,
    )
}
