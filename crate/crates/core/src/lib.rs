//! Euclidean-norm regularization of CP tensor factorizations.
//!
//! The sum over CP components of powers of their factor column norms is a
//! variational form of the tensor Schatten-`p` quasi-norm. This crate
//! evaluates those regularizers and uses them in two recovery problems:
//!
//! * [`lrtc`]: low-rank tensor completion from a subset of noisy entries,
//!   solved by block coordinate descent with extrapolation or by a
//!   limited-memory quasi-Newton method.
//! * [`trpca`]: tensor robust PCA, separating a low-rank tensor from sparse
//!   corruption by ADMM, ADMM with reweighted least squares, or alternating
//!   least squares.
//!
//! [`harness`] generates the synthetic benchmarks, computes recovery metrics
//! and runs parameter sweeps; [`io`] reads and writes the binary tensor and
//! mask formats used by the `cp-enr` command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod io;
mod kernels;
pub mod linalg;
pub mod lrtc;
pub mod regularizers;
pub mod tensor;
pub mod trpca;

pub use error::{EnrError, Result};
pub use lrtc::{LrtcConfig, LrtcSolver, SolveReport};
pub use regularizers::{RegularizerKind, RegularizerSpec, Table2Row};
pub use tensor::{
    cp_reconstruct, fold, khatri_rao, khatri_rao_pair, masked_residual, sample_mask, unfold, DenseTensor,
    FactorSet, Matrix, ObservationMask, Shape,
};
pub use trpca::{TrpcaConfig, TrpcaReport};
