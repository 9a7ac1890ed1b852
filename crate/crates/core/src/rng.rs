//! Per-entity random streams.
//!
//! Every stochastic draw in the engine comes from a ChaCha stream keyed by
//! `(seed, domain, entity id)`, so results do not depend on iteration order
//! or on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the streams used by independent stages that share a seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Domain {
    Synthesis = 0x5359_4e54,
    ModeChoice = 0x4d4f_4445,
    ChargeLocation = 0x4c4f_4341,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn stream(seed: u64, domain: Domain, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ domain as u64));
    rng.set_stream(id);
    rng
}
