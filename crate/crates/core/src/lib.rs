//! Hypocoercivity analysis for mode families `C_eta = eta C_S + C_H` of
//! accretive matrices: index computation, constructive Lyapunov
//! certificates, short-time decay of propagator norms, and periodic
//! port-Hamiltonian systems decomposed into Fourier modes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod family;
pub mod fixtures;
pub mod index;
pub mod linalg;
pub mod lyapunov;
pub mod ph;
pub mod shorttime;

pub use error::{Error, Result};
