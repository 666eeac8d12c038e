//! Extended Reed-Solomon codes over GF(2^n) decoded as `n` coupled binary
//! polar codes with dynamic frozen symbols.
//!
//! The crate is organized bottom-up:
//!
//! - [`galois`]: GF(2^n) arithmetic and bit composition of symbols.
//! - [`ers_code`]: code construction and encoders.
//! - [`transform`]: the polar kernel, permutations and the pre-transformed matrix.
//! - [`decoder`]: SC and SCL decoding with operation counters.
//! - [`analysis`]: subchannel error profiles and SC performance bounds.
//! - [`sim`]: AWGN/BPSK channel and the frame-error-rate harness.

pub mod analysis;
pub mod decoder;
pub mod error;
pub mod ers_code;
pub mod galois;
pub mod matrix;
pub mod sim;
pub mod transform;

pub use error::{Error, Result};
pub use galois::{FieldElement, FieldSpec};
