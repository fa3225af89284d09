//! Seeded random streams.
//!
//! Every stochastic component draws from a stream keyed by the run seed plus
//! a tuple of indices (round, generation, chromosome, block, ...). Results
//! therefore never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `seed` and a path of indices.
pub fn stream(seed: u64, path: &[u64]) -> Stream {
    let mut key = splitmix64(seed);
    for &p in path {
        key = splitmix64(key ^ splitmix64(p.wrapping_add(0x2545_F491_4F6C_DD1D)));
    }
    ChaCha8Rng::seed_from_u64(key)
}
