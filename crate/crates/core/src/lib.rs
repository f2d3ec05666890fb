//! Generalized interference alignment for MIMO networks.
//!
//! * [`numerics`]: complex SVD-based rank and pseudo-inverse.
//! * [`network`]: configurations, alignment sets, channels, config files.
//! * [`feasibility`]: the first-order coefficient matrix, its Jacobian and the
//!   feasibility verdict.
//! * [`aligner`]: alternating least-squares transceiver design, the classical
//!   eigenvector baseline and solution verification.
//! * [`harness`]: seeded randomized experiments with CSV output.

pub mod aligner;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod network;
pub mod numerics;

pub use error::{GiaError, Result};
