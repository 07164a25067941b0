//! Learning 2:4 semi-structured sparsity masks by proximal gradient descent.
//!
//! The crate is organised bottom-up:
//!
//! - [`prox`]: exact mathematics on a single block of four weights. The
//!   2:4 regularizer, its proximal operator (solved by enumeration of three
//!   candidates with alternating soft-thresholding), a projected-gradient
//!   variant and a brute-force reference solver.
//! - [`tensor`]: weight and mask tensors blocked along the input dimension,
//!   the full-tensor regularizers, the blockwise prox map, 2:4 projection and
//!   the training diagnostics.
//! - [`model`]: small teacher/student models with hand-written backprop and
//!   synthetic calibration data.
//! - [`train`]: the outer proximal-gradient loop and its ablation arms.
//! - [`baselines`]: magnitude and activation-weighted mask selection.
//! - [`bench`]: solver benchmark and regularization-path drivers used by the
//!   CLI.
//! - [`experiment`]: the generated teacher task and the mask comparison
//!   behind `prox24 train`.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod experiment;
pub mod model;
pub mod prox;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use prox::{
    alm, enum_alm, enum_pgd, kkt_2sparse_threshold, oracle_prox, prox_objective, reg24_block,
    soft_threshold, AlmOutput, Block4, CandidateKind, PgdConfig, ProxParams, ProxSolution,
    SortedBlock,
};
pub use tensor::{MaskTensor, RegW0Params, WeightTensor};
