//! Throughput-key bounds for state masking over a two-state compound
//! channel: single-letter divergence machinery, the inner and outer
//! closed-form bounds with independent numerical oracles, the Gaussian
//! special case, normal-approximation asymptotics, and a finite-blocklength
//! simulator of the coding scheme and the adversary's threshold test.

pub mod asymptotics;
pub mod bounds;
pub mod channel;
pub mod error;
pub mod gaussian;
pub mod normal;
pub mod probdist;
pub mod simulator;

pub use error::{Error, Result};
