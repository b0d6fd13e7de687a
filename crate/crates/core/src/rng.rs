//! Seeded random streams and the integer hash used by the partitioners.
//!
//! Every random draw in the crate comes from a stream keyed by the run seed
//! plus a small tuple of coordinates (iteration, partition, worker, ...), so
//! runs are reproducible regardless of thread scheduling as long as each
//! stream is consumed by a single owner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all sampling.
pub type StreamRng = ChaCha8Rng;

/// Stream domains. Keeps streams for different purposes disjoint even when
/// their numeric coordinates coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Init = 1,
    SparseInitWord = 2,
    SparseInitDoc = 3,
    Sampling = 4,
    Extend = 5,
    Inference = 6,
    Partition = 7,
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one 64-bit key.
pub fn mix(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn stream(seed: u64, domain: Domain, coords: &[u64]) -> StreamRng {
    let mut key = Vec::with_capacity(coords.len() + 1);
    key.push(domain as u64);
    key.extend_from_slice(coords);
    StreamRng::seed_from_u64(mix(seed, &key))
}

/// The stream a partition worker samples from during one iteration.
pub fn worker_rng(seed: u64, iteration: u64, partition: u32, worker: u32) -> StreamRng {
    stream(
        seed,
        Domain::Sampling,
        &[iteration, partition as u64, worker as u64],
    )
}
