//! Bit-flip error correction on the toric code.
//!
//! Two decoders share one lattice model: an exact minimum-weight perfect
//! matching reference ([`matching`]) and a deep Q-network agent ([`dqn`])
//! that moves defects one plaquette at a time. [`harness`] runs Monte Carlo
//! benchmarks over both.

pub mod dqn;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod matching;
pub mod nn;
pub mod rng;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
pub use lattice::{Action, CodeDistance, Direction, HiddenState, Plaquette, Syndrome};
