//! Seeded generators. Every randomized routine in the crate takes an explicit
//! `u64` seed and builds its generator here, so runs are replayable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for member `index` of stream `stream`, derived from a master seed by
/// fixed offsets.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    master.wrapping_add(stream.wrapping_mul(0x0001_0000_0000)).wrapping_add(index)
}

/// Well-mixed seed for independent replicate `index` (splitmix64 finalizer),
/// used where neighbouring replicates must not share derived seeds.
pub fn replicate(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
