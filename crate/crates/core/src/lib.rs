//! Simulation of RLL-constrained unequal-error-protection LDPC codes over
//! partial-response and media-noise recording channels.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod config;
pub mod degree;
pub mod encoder;
pub mod equalize;
pub mod error;
pub mod ldpc;
pub mod mapping;
pub mod optimize;
pub mod peg;
pub mod rll;
pub mod rng;
pub mod sim;
pub mod turbo;

pub use error::{Error, Result};
