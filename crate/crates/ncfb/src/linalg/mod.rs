//! Dense complex linear algebra: the matrix container, a hermitian
//! eigensolver, and Gram-matrix orthonormalization. Everything numerical in
//! the crate funnels through these three files.

mod cmat;
mod eig;
mod gram;

pub use cmat::{phase_fix, vec_inner, vec_norm, CMat};
pub use eig::{eigh, exp_skew, inverse, opnorm, polar_unitary, psd_kernel, psd_rank};
pub use gram::{gram_rank, semi_orthobasis, SemiBasis};
