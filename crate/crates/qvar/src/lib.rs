//! Value-at-risk and conditional value-at-risk for European option portfolios,
//! computed by a classical finite-difference/Monte Carlo engine and by a
//! statevector simulation of the corresponding quantum circuit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block_encoding;
pub mod error;
pub mod fixed;
pub mod market;
pub mod mc;
pub mod nogo;
pub mod pde;
pub mod pipeline;
pub mod qcore;
pub mod qpca;
pub mod qsvt;
pub mod risk;

pub use error::{QvarError, Result};
