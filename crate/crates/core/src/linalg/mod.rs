//! Shared dense/banded linear algebra used by the solvers and diagnostics.

pub mod banded;
pub mod schur;
pub mod weights;

pub use banded::{Banded, BandedLu};
pub use schur::{complete_orthonormal, ordered_schur, quasi_triangular_eigenvalues, solve_sylvester, OrderedSchur};
pub use weights::{metric_adjoint, op_norm, Weight};
