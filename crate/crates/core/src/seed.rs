//! Labelled random streams derived from a master seed.
//!
//! Each component draws from `SHA-256(master || label || index)`, so adding
//! or reordering experiments never shifts another component's randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"densep/v1");
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

pub fn stream(master: u64, label: &str, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(master, label, index))
}
