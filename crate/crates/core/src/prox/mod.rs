//! Block-level mathematics of the 2:4 regularizer and its proximal operator.

mod alm;
mod block;
mod oracle;
mod pgd;

pub use alm::{alm, alm_traced, enum_alm, kkt_2sparse_threshold, AlmOutput};
pub use block::{
    prox_objective, reg24_block, soft_threshold, Block4, CandidateKind, ProxParams, ProxSolution,
    SortedBlock,
};
pub use oracle::{oracle_prox, oracle_prox_with, oracle_restricted, OracleConfig};
pub use pgd::{enum_pgd, PgdConfig};

pub(crate) use block::reg24_unchecked;
