//! Adaptive sublinear-time block-sparse Fourier transform.
//!
//! The pipeline reduces the input to 2k1 short signals, allocates per-signal
//! sparsity budgets from estimated energies, locates heavy blocks by hashing,
//! then prunes and estimates them in an outer loop that lowers the residual
//! energy geometrically. Dense oracles for every stage live in [`oracles`].

pub mod downsampling;
pub mod error;
pub mod fft;
pub mod filters;
pub mod hashing;
pub mod location;
pub mod oracles;
pub mod recovery;
pub mod rng;
pub mod semi_equi;
pub mod signal;
pub mod tuning;

pub use error::{BsftError, Result};
pub use num_complex::Complex64;
