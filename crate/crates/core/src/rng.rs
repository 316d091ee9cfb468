//! Deterministic per-agent random streams.
//!
//! Every agent draws from a ChaCha stream seeded by `derive_seed(global, id)`,
//! so a simulated run and a one-process-per-agent run generate identical data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One step of the SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `stream` under `global`.
pub fn derive_seed(global: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(global) ^ splitmix64(stream.wrapping_add(0x6A09_E667_F3BC_C909)))
}

pub fn agent_rng(global_seed: u64, id: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(global_seed, id as u64))
}

/// Pair of independent standard normals by the Box–Muller transform.
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // open interval (0, 1] keeps ln finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}
