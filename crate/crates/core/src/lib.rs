//! Computational machinery for integers `n` whose central binomial
//! coefficient `binom(2n, n)` is divisible by a fixed set of odd primes only to
//! low multiplicity.
//!
//! The crate is organised bottom-up:
//!
//! - [`arith`]: digit expansions, Kummer carry counting, the factor oracle and
//!   the prime-set type shared by every other module.
//! - [`fixed`]: certified fixed-point reals (midpoint plus radius) used for
//!   `log 2 / log p` and everything derived from it.
//! - [`heuristics`]: the digit-density criterion `sigma < 1`.
//! - [`search`]: simultaneous base-`p` digit-constraint searches with
//!   resumable checkpoints.
//! - [`construction`]: the block-by-block base-2 construction of `n` with few
//!   large base-`p` digits.
//! - [`equidist`]: orbit samples, Weyl sums, box counts, bounded-height
//!   relation search and the relation-to-curve pipeline.
//! - [`fourier`]: desk-scale digit sets, discretised curves, large spectra,
//!   exceptional sets and the exponential-sum lower bound.

pub mod arith;
pub mod construction;
pub mod equidist;
mod error;
pub mod fixed;
pub mod fourier;
pub mod heuristics;
pub mod search;

pub use arith::{DigitVector, PrimeSet, ValuationReport};
pub use error::{Error, Result};
pub use fixed::Fixed;
