//! Seed derivation.
//!
//! All randomness in the pipeline flows from one root seed. Sub-seeds are
//! derived as `splitmix64(root ^ fnv1a(domain) ^ index * GOLDEN)`, so two
//! call sites never share a stream unless they share both the domain string
//! and the index.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed for a named domain and index under a root seed.
pub fn sub_seed(root: u64, domain: &str, index: u64) -> u64 {
    splitmix64(root ^ fnv1a(domain.as_bytes()) ^ index.wrapping_mul(GOLDEN))
}

/// Seeded generator for a named domain and index.
pub fn rng(root: u64, domain: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(root, domain, index))
}
