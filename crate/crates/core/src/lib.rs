//! Finite element Chorin projection schemes for the periodic stochastic
//! Stokes problem with multiplicative Q-Wiener noise, and a Monte Carlo
//! harness for measuring their strong convergence rates.
//!
//! The crate is `no_std` (it needs `alloc`); IO, threading and FFT
//! preconditioning live in the `chorin-cli` companion crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod experiments;
pub mod fem;
pub mod scheme;
pub mod stochastic;
pub mod validation;

#[cfg(test)]
mod test_support;

pub use error::{Error, Result};
