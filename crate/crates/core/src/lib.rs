//! Numerical laboratory for pure point measures and discrete tempered
//! distributions on the real line.

pub mod almostperiodic;
pub mod cli;
pub mod counterexample;
pub mod distribution;
pub mod error;
pub mod exact;
pub mod fit;
pub mod periodic;
pub mod pointset;
pub mod schwartz;
pub mod sum;

pub use error::{Error, Result};
