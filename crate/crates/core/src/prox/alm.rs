use super::block::{
    count_nonzeros, prox_objective, soft_threshold, CandidateKind, ProxParams, ProxSolution,
    SortedBlock,
};
use super::Block4;
use crate::error::{Error, Result};

/// Result of one alternating-minimization run, in sorted coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlmOutput {
    pub w: [f64; 4],
    pub sweeps: usize,
    pub converged: bool,
}

/// Sum of pairwise products of the three coordinates other than `i`.
#[inline]
pub(crate) fn pair_sum_excluding(w: &[f64; 4], i: usize) -> f64 {
    let (a, b, c) = match i {
        0 => (w[1], w[2], w[3]),
        1 => (w[0], w[2], w[3]),
        2 => (w[0], w[1], w[3]),
        _ => (w[0], w[1], w[2]),
    };
    a * b + b * c + a * c
}

fn check_support(support: usize) -> Result<()> {
    if support == 3 || support == 4 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "support must be 3 or 4, got {support}"
        )))
    }
}

/// Cyclic coordinate minimization of the prox objective restricted to the
/// first `support` sorted coordinates over the nonnegative orthant.
///
/// Each coordinate update is a soft-threshold of `z_i` by `lambda` times the
/// pairwise products of the remaining coordinates.
pub fn alm(sb: &SortedBlock, params: &ProxParams, support: usize) -> Result<AlmOutput> {
    check_support(support)?;
    Ok(alm_sweeps(sb.z(), params, support, |_| {}))
}

/// Like [`alm`] but calls `observe` with the starting point and with the
/// iterate after every full sweep.
pub fn alm_traced(
    sb: &SortedBlock,
    params: &ProxParams,
    support: usize,
    observe: impl FnMut(&[f64; 4]),
) -> Result<AlmOutput> {
    check_support(support)?;
    Ok(alm_sweeps(sb.z(), params, support, observe))
}

fn alm_sweeps(
    z: &[f64; 4],
    params: &ProxParams,
    support: usize,
    mut observe: impl FnMut(&[f64; 4]),
) -> AlmOutput {
    let lambda = params.lambda;
    let mut w = [0.0; 4];
    w[..support].copy_from_slice(&z[..support]);
    observe(&w);

    let tol_sq = params.eps_alm * params.eps_alm;
    let mut sweeps = 0;
    loop {
        let prev = w;
        for i in 0..support {
            w[i] = soft_threshold(z[i], lambda * pair_sum_excluding(&w, i));
        }
        sweeps += 1;
        observe(&w);

        let step_sq: f64 = (0..4).map(|i| (w[i] - prev[i]) * (w[i] - prev[i])).sum();
        if step_sq <= tol_sq {
            return AlmOutput {
                w,
                sweeps,
                converged: true,
            };
        }
        if sweeps >= params.max_iters {
            return AlmOutput {
                w,
                sweeps,
                converged: false,
            };
        }
    }
}

/// Picks the best of the three candidates (all in sorted coordinates) and
/// maps it back. Earlier candidates win exact ties, so the sparser one is
/// preferred.
pub(crate) fn select_candidate(
    sb: &SortedBlock,
    y: &Block4,
    lambda: f64,
    candidates: [([f64; 4], CandidateKind); 3],
    iters: usize,
    converged: bool,
) -> ProxSolution {
    let z = sb.z();
    let mut best = 0;
    let mut best_obj = prox_objective(&candidates[0].0, z, lambda);
    for (k, (w, _)) in candidates.iter().enumerate().skip(1) {
        let obj = prox_objective(w, z, lambda);
        if obj < best_obj {
            best = k;
            best_obj = obj;
        }
    }
    let (w_sorted, kind) = candidates[best];
    let w = sb.restore(&w_sorted);
    debug_assert!(kind != CandidateKind::TwoSparse || count_nonzeros(&w) <= 2);
    ProxSolution {
        w,
        objective: prox_objective(&w, y.as_array(), lambda),
        candidate_kind: kind,
        iters,
        converged,
    }
}

/// Blockwise prox of `lambda * reg24` by candidate enumeration: the 2-sparse
/// closed form plus 3-sparse and dense candidates from [`alm`].
pub fn enum_alm(y: &Block4, params: &ProxParams) -> ProxSolution {
    let sb = SortedBlock::from_block(y);
    let z = sb.z();
    let two = [z[0], z[1], 0.0, 0.0];
    let three = alm_sweeps(z, params, 3, |_| {});
    let dense = alm_sweeps(z, params, 4, |_| {});
    select_candidate(
        &sb,
        y,
        params.lambda,
        [
            (two, CandidateKind::TwoSparse),
            (three.w, CandidateKind::ThreeSparse),
            (dense.w, CandidateKind::Dense),
        ],
        three.sweeps + dense.sweeps,
        three.converged && dense.converged,
    )
}

/// Smallest `lambda` at which `[z1, z2, 0, 0]` is first-order stationary:
/// `z3 / (z1 * z2)`.
pub fn kkt_2sparse_threshold(sb: &SortedBlock) -> Result<f64> {
    let z = sb.z();
    let denom = z[0] * z[1];
    if denom == 0.0 {
        return Err(Error::UndefinedThreshold);
    }
    Ok(z[2] / denom)
}
