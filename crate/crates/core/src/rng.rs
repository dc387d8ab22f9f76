//! Named deterministic RNG substreams.
//!
//! Every random choice in the library flows from one root seed through a
//! named stream (`folds`, `init`, `batching`, `anchors`, ...), so runs are
//! reproducible and independent streams never alias.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives a 32-byte ChaCha key from `(seed, name)` with an FNV-1a mix.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed
        .to_le_bytes()
        .iter()
        .chain(name.as_bytes())
        .chain(&[0xff])
    {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        let mut hi = h.wrapping_add(i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        hi ^= hi >> 31;
        hi = hi.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        hi ^= hi >> 29;
        chunk.copy_from_slice(&hi.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Substream further keyed by an index (fold number, model number, ...).
pub fn substream_indexed(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    substream(seed.rotate_left(17) ^ index.wrapping_mul(0x2545_f491_4f6c_dd1d), name)
}

/// Stable 64-bit mix of a seed with context indices.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = h.rotate_left(23).wrapping_mul(0xff51_afd7_ed55_8ccd);
    }
    h
}

/// FNV-1a hex digest of a string, for config fingerprints.
pub fn stable_hash_hex(s: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}
