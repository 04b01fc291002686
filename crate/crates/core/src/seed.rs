//! Hash-derived random streams.
//!
//! Every stochastic decision draws from a stream keyed by the run seed and a
//! list of identifying labels, never from a shared sequential generator, so the
//! outcome of a call does not depend on when or on which thread it runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a 32-byte seed from `seed` and the labels. Labels are
/// length-prefixed so `["ab", "c"]` and `["a", "bc"]` never collide.
pub fn derive(seed: u64, labels: &[&str]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"collabcal/v1");
    hasher.update(seed.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}

pub fn rng_for(seed: u64, labels: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive(seed, labels))
}
