//! Numerical simulator of the quantum adiabatic procedure for deciding
//! whether a Diophantine equation has a non-negative integer solution,
//! together with finite-truncation checks of its spectral and probabilistic
//! properties.

// Range checks are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diophantine;
pub mod error;
pub mod fock;
pub mod evolve;
pub mod linalg;
pub mod protocol;
pub mod spectral;
pub mod twolevel;

pub use error::{Error, ParseError, ParseErrorKind, Result};
