//! Turnpike diagnostics for finite-horizon optimal control.
//!
//! The crate solves semilinear finite-horizon problems by direct
//! transcription with exact discrete adjoints, solves the steady companion
//! problem, and quantifies how long and how closely the dynamic solution
//! (state, control and adjoint) hugs the steady optimum: interval coverage,
//! exceedance measures, exponential envelope fits, spectral splitting of the
//! frozen adjoint operator, and constructive audits of the stability and
//! observability constants behind those estimates.

pub mod diagnostics;
pub mod dynamic;
pub mod error;
pub mod heat;
pub mod linalg;
pub mod model;
pub mod registry;
pub mod report;
pub(crate) mod serde_util;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
