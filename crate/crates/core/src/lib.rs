//! Partition-parallel collapsed Gibbs sampling for LDA topic models.

pub mod corpus;
pub mod engine;
pub mod kernels;
pub mod metrics;
pub mod model_io;
pub mod partition;
pub mod rng;
pub mod samplers;
pub mod sparse;
pub mod synth;
