//! Deterministic seed derivation. Every random stream is keyed by the base
//! seed plus a path of tags, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod tags {
    pub const CHANNEL: u64 = 1;
    pub const SOLVER_INIT: u64 = 2;
    pub const WMMSE_INIT: u64 = 3;
    pub const CERTIFY: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |h, &p| {
        splitmix64(h ^ splitmix64(p.rotate_left(17)))
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
