//! Random number plumbing.
//!
//! Sequential streams are ChaCha8 with the stream id selecting an independent
//! keystream, so replica `i` of an experiment is reproducible on its own.
//! Simulation loops draw from a xoshiro generator keyed by such a stream.
//! Counter-based values (`hash_uniform`, `hash_normal`) are pure functions of
//! a key and are used wherever a quantity must be addressable by index, such
//! as disorder values at arbitrary sites or Brownian bridge midpoints.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent reproducible stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Fast generator for hot simulation loops.
pub type FastRng = rand_xoshiro::Xoshiro256PlusPlus;

/// Xoshiro generator keyed by the ChaCha stream `stream` under `seed`.
pub fn fast_stream(seed: u64, stream_id: u64) -> FastRng {
    let mut key = [0u8; 32];
    rand::RngCore::fill_bytes(&mut stream(seed, stream_id), &mut key);
    FastRng::from_seed(key)
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into one 64-bit hash.
#[inline]
pub fn hash(words: &[u64]) -> u64 {
    let mut h = 0x6A09_E667_F3BC_C909_u64;
    for &w in words {
        h = splitmix(h ^ splitmix(w));
    }
    h
}

/// Uniform in (0, 1], never zero, so logs are safe.
#[inline]
pub fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn hash_uniform(words: &[u64]) -> f64 {
    unit_open(hash(words))
}

/// Standard normal from a key, by Box-Muller on two derived uniforms.
pub fn hash_normal(words: &[u64]) -> f64 {
    let h = hash(words);
    let u1 = unit_open(splitmix(h ^ 0x1));
    let u2 = unit_open(splitmix(h ^ 0x2));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
