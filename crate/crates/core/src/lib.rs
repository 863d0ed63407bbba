//! Localization invariants for Cowen-Douglas operator tuples.
//!
//! The library computes, from the two-variable jet of a reproducing-kernel
//! Gram matrix, the operator-valued invariants `K_z^{IJ}` attached to the
//! k-th order localization of a commuting operator tuple, and decides
//! unitary equivalence of two localizations by joint unitary equivalence
//! of the resulting finite matrix tuples (trace words plus a constructive
//! certificate search).
//!
//! Modules follow the data flow:
//!
//! * [`multiindex`] — exponent tuples, factorials, the graded-lex ordering;
//! * [`jets`] — truncated one- and two-variable matrix jets at a basepoint;
//! * [`kernels`] — concrete kernel models and jet extraction (exact and
//!   quadrature-based);
//! * [`localization`] — frame normalization, block Gram assembly, invariant
//!   extraction, and the independent operator-product route;
//! * [`specht`] — trace-word tests and unitary certificate search for
//!   matrix tuples;
//! * [`pipeline`] — point and grid comparison of two kernel models;
//! * [`config`] — serde-facing descriptors for models, requests and reports.

pub mod config;
pub mod jets;
pub mod kernels;
pub mod localization;
pub mod multiindex;
pub mod pipeline;
pub mod specht;
pub mod util;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

pub use kernels::KernelModel;
pub use multiindex::{IndexOrdering, MultiIndex};
pub use specht::{EquivalenceVerdict, MatrixTuple, Status, TraceWord};
