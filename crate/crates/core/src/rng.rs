//! Seeded randomness.
//!
//! Every random decision in the pipeline draws from a ChaCha8 stream keyed by
//! `SHA-256(label || 0x00 || seed as little-endian u64)`. The label splits one
//! user-facing seed into independent streams (sampling, shuffling, weight
//! init, ...), so adding a new consumer never perturbs existing ones.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Independent generator for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Deterministic in-place Fisher-Yates shuffle.
pub fn shuffle<T>(items: &mut [T], seed: u64, label: &str) {
    let mut rng = stream(seed, label);
    items.shuffle(&mut rng);
}
