//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose seed is the
//! user seed mixed with a (component, replicate) key, so independent parts
//! of a simulation never share or depend on draw order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `seed ⊕ hash(component, replicate)`.
pub fn derive_seed(seed: u64, component: u64, replicate: u64) -> u64 {
    seed ^ mix64(mix64(component) ^ replicate.rotate_left(32))
}

pub fn stream(seed: u64, component: u64, replicate: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, component, replicate))
}
