//! Deterministic random streams.
//!
//! Every consumer of randomness derives its generator from a master seed and a
//! textual label by hashing, then selects a ChaCha stream by index. Results
//! therefore depend only on `(master seed, label, index)` and never on thread
//! scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Hash a master seed and label into a 32-byte ChaCha key.
pub fn derive_key(master_seed: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"ising-concentration/substream/v1");
    hasher.update(master_seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.finalize().into()
}

/// Generator for substream `index` of the component named `label`.
pub fn substream(master_seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(derive_key(master_seed, label));
    rng.set_stream(index);
    rng
}

/// Derive a child seed from a master seed and label, for APIs that take a
/// plain seed. The top bit is cleared so the value fits a TOML integer.
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    let key = derive_key(master_seed, label);
    u64::from_le_bytes(key[..8].try_into().expect("slice of length 8")) >> 1
}

/// Uniform index in `0..n` from exactly one 64-bit draw (multiply-high, no
/// rejection loop; bias is at most n / 2^64).
#[inline]
pub fn index_from_u64(draw: u64, n: usize) -> usize {
    ((draw as u128 * n as u128) >> 64) as usize
}

/// Uniform f64 in [0, 1) from exactly one 64-bit draw.
#[inline]
pub fn unit_from_u64(draw: u64) -> f64 {
    (draw >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn uniform_index<R: RngCore>(rng: &mut R, n: usize) -> usize {
    index_from_u64(rng.next_u64(), n)
}

#[inline]
pub fn uniform_unit<R: RngCore>(rng: &mut R) -> f64 {
    unit_from_u64(rng.next_u64())
}

/// Fill `spins` with independent fair ±1 values, 64 spins per draw.
pub fn fill_uniform_spins<R: RngCore>(rng: &mut R, spins: &mut [i8]) {
    for chunk in spins.chunks_mut(64) {
        let bits = rng.next_u64();
        for (b, s) in chunk.iter_mut().enumerate() {
            *s = if (bits >> b) & 1 == 1 { 1 } else { -1 };
        }
    }
}
