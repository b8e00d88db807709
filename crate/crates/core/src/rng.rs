//! Seed derivation.
//!
//! Every random stream is a `ChaCha8Rng` whose key is derived from a
//! `(seed, domain)` pair and whose stream counter selects the item
//! (particle, path, ...). Items never share state, so results do not
//! depend on the order or thread in which they are drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains.
pub mod domain {
    pub const PATH: u64 = 0x7061_7468;
    pub const INITIAL: u64 = 0x696e_6974;
    pub const AUX: u64 = 0x6175_7869;
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for item `index` of a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// RNG for item `stream` of `domain` under `seed`.
pub fn stream_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed) ^ splitmix64(domain));
    rng.set_stream(stream);
    rng
}
