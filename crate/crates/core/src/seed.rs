//! Seed derivation and the portable generator used by every seeded stage.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), whose
//! output stream is fixed by its algorithm and independent of platform.
//! Per-item generators are keyed by SHA-256 of the global seed and the item
//! id, so an item's draws do not depend on where it sits in the input.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type ForgeRng = ChaCha8Rng;

/// Generator for a whole stage.
pub fn stage_rng(seed: u64) -> ForgeRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator scoped to one item (example, record) under a global seed.
pub fn item_rng(seed: u64, item_id: &str) -> ForgeRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(item_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
