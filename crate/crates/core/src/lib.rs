//! Operator-valued free probability over crossed products `M ×_α G`.
//!
//! The crate is organised bottom-up:
//!
//! - [`nclattice`]: noncrossing partitions, their order, Möbius values and block nesting.
//! - [`groupwords`]: free products of cyclic groups with reduced-word normal forms.
//! - [`coeffalgebra`]: the coefficient algebra M of full or diagonal complex matrices,
//!   exact (Gaussian rationals) or floating point.
//! - [`crossedalg`]: the crossed product, its adjoint and the conditional expectation `E_M`.
//! - [`freeprob`]: partition-dependent moments, amalgamated cumulants and a freeness checker.
//! - [`scenario`] and [`verify`]: JSON scenarios and the identity-replay suite used by the CLI.

pub mod coeffalgebra;
pub mod crossedalg;
pub mod error;
pub mod freeprob;
pub mod groupwords;
pub mod nclattice;
pub mod rng;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
