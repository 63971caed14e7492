//! Desk-scale simulator and cost-model library for quantum convolution via
//! sparse matrix reshaping.
//!
//! Convolution is rewritten as a sparse matrix product: the kernel bank is
//! reshaped into a doubly block-Toeplitz matrix whose rows, amplitude-encoded
//! as quantum states, are compared against flattened input columns through
//! SWAP-test or interference-test circuits. Every quantum estimate is checked
//! against a classical convolution oracle, and state preparation costs are
//! tracked in an explicit ledger.

pub mod circuits;
pub mod engine;
pub mod error;
pub mod io;
pub mod qstate;
pub mod reshape;
pub mod tensor;

pub use error::{Error, Result};
