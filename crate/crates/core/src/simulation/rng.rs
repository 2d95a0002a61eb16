//! Per-replication random streams.
//!
//! Every replication draws from its own `ChaCha8Rng`, seeded with
//!
//! ```text
//! s = splitmix64(splitmix64(splitmix64(seed) ^ rep) ^ fnv1a64(scenario_id))
//! ```
//!
//! so replications are independent of each other and of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the SplitMix64 finalizer (Steele, Lea and Flood constants).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01B3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

pub fn stream_seed(seed: u64, rep: u64, scenario_id: &str) -> u64 {
    let h = splitmix64(splitmix64(seed) ^ rep);
    splitmix64(h ^ fnv1a64(scenario_id.as_bytes()))
}

pub fn replication_rng(seed: u64, rep: u64, scenario_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, rep, scenario_id))
}
