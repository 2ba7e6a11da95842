//! Secret-key generation over a lower-triangular deterministic channel model.
//!
//! Alice and Bob alternate transmissions over a reciprocal channel whose
//! gain is a binary expansion: a coarse part (how many bit levels survive
//! above the noise floor) and a fine part (the mantissa bits, which are the
//! shared randomness). Channel action is a lower-triangular Toeplitz matrix
//! over GF(2). An eavesdropper sees only the top levels of each
//! transmission.
//!
//! The crate is organised bottom-up:
//!
//! - [`gf2lin`]: bit words and Toeplitz (convolution) arithmetic.
//! - [`detmodel`]: gain quantization, channel topology, per-round gains.
//! - [`protocols`]: pilot, product and mixed signalling.
//! - [`secrecy`]: exhaustive enumeration of all randomness to compute exact
//!   key entropy and leakage to the eavesdropper.
//! - [`gaussian`]: Monte Carlo and quadrature evaluation of the Gaussian
//!   mutual-information lower bound, plus SNR-to-rate translations.

pub mod detmodel;
pub mod error;
pub mod gaussian;
pub mod gf2lin;
pub mod protocols;
pub mod rng;
pub mod secrecy;

pub use error::{Error, Result};
pub use gf2lin::{BitVec, LtToeplitz};
