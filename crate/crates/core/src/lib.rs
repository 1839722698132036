//! Exact simulation of quantum `(k, n)` threshold secret sharing in which
//! every participant deals a share of their own private qudit, so no single
//! trusted dealer is needed.
//!
//! The crate is `no_std` (it needs `alloc`). Layers, bottom up:
//!
//! - [`gfq`]: prime-field arithmetic and modulus selection.
//! - [`linalg`]: polynomials, Vandermonde matrices, Gauss-Jordan inversion.
//! - [`qstate`]: sparse pure states over q-ary registers.
//! - [`threshold`]: single-dealer polynomial-code split and reconstruction.
//! - [`protocol`]: the dealer-free multi-party protocol, both the n-fold
//!   variant and the shared-register variant.
//! - [`analysis`]: independent closed-form oracles and secrecy scans.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod gfq;
pub mod linalg;
pub mod protocol;
pub mod qstate;
pub mod threshold;

pub use gfq::{find_modulus, FieldElement, FieldError, PrimeField};
pub use linalg::{CoeffVector, EvalPoints, LinalgError, MatrixFq};
pub use qstate::{DensityMatrix, RegisterId, RegisterLayout, SparseState, StateError};
pub use threshold::{SchemeParams, ShareBundle, ThresholdError};
