//! Seed derivation for independent per-(trial, node, role) streams.
//!
//! Every random stream in a simulation is keyed by `(master, trial, node, role)`, so adding
//! trials or nodes never perturbs the streams that already exist.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as StreamRng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Input = 1,
    Noise = 2,
    Targets = 3,
    Moments = 4,
    Pilot = 5,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, trial: u64, node: u64, role: StreamRole) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ trial);
    h = splitmix64(h ^ node.wrapping_mul(0x1000_0000_01B3));
    splitmix64(h ^ role as u64)
}

pub fn stream(master: u64, trial: u64, node: u64, role: StreamRole) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, trial, node, role))
}
