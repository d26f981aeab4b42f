//! Payload-byte intrusion detection with deep embedded clustering, gradient
//! boosted trees and uncertainty-aware open-set recognition.

pub mod checkpoint;
pub mod config;
pub mod dataio;
pub mod dec;
pub mod error;
pub mod eval;
pub mod gbt;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod transfer;
pub mod uq;

pub use error::{OdxuError, Result};

/// Index of the first maximum; 0 for an empty iterator.
pub fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
