//! Weighted discrete samplers.
//!
//! All samplers take pre-drawn uniforms instead of an RNG so callers control
//! random-number reuse, and so different samplers can be driven in lockstep.
//! Every sampler returns the smallest outcome whose cumulative weight is
//! strictly greater than the uniform (ties go to the next outcome).

mod alias;
mod cdf;
mod fplus;

pub use alias::{AliasTable, ExactBins};
pub use cdf::CumulativeTable;
pub use fplus::FPlusTree;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("weights have zero total mass")]
    ZeroMass,
    #[error("empty support")]
    EmptySupport,
    #[error("invalid weight {0}")]
    InvalidWeight(f64),
    #[error("leaf {0} out of range")]
    OutOfRange(usize),
    #[error("update would make leaf {leaf} negative ({value})")]
    NegativeLeaf { leaf: usize, value: f64 },
}

/// Linear scan over dense weights for `u` in `[0, sum)`.
pub fn linear_sample(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 {
            last_positive = k;
        }
        if acc > u {
            return k;
        }
    }
    last_positive
}
