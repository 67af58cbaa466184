//! Seeded random streams.
//!
//! A run owns one 64-bit seed. Every consumer (environment resets, weight
//! initialisation, exploration, replay sampling) gets its own ChaCha stream
//! derived from that seed and a fixed stream id, so adding draws in one place
//! never shifts the numbers seen elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids used by the training loops.
pub mod stream {
    pub const ENV: u64 = 1;
    pub const INIT_GOOD: u64 = 2;
    pub const INIT_ADVERSARY: u64 = 3;
    pub const EXPLORE_GOOD: u64 = 4;
    pub const EXPLORE_ADVERSARY: u64 = 5;
    pub const REPLAY_GOOD: u64 = 6;
    pub const REPLAY_ADVERSARY: u64 = 7;
    pub const EVAL: u64 = 8;
    pub const INIT_PRIMARY: u64 = 9;
    pub const EXPLORE_PRIMARY: u64 = 10;
    pub const REPLAY_PRIMARY: u64 = 11;
    pub const EXPLORE_FROZEN: u64 = 12;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for a single episode, mixing the run seed with the episode index
/// (splitmix64 finaliser).
pub fn episode_seed(seed: u64, salt: u64, episode: u64) -> u64 {
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(episode.wrapping_mul(0xD1B5_4A32_D192_ED69));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
