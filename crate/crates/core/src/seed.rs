//! Deterministic seed derivation.
//!
//! Every randomized object (dataset example, network init, epoch shuffle) is
//! seeded from a 64-bit value derived with the SplitMix64 finalizer, so any
//! implementation in any language can reproduce the exact streams:
//!
//! ```text
//! mix(z):  z += 0x9E3779B97F4A7C15
//!          z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!          z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!          z ^ (z >> 31)
//! derive(master, parts...): fold mix over (master, part_0, part_1, ...)
//!                           with state = mix(state ^ part_i)
//! ```

/// SplitMix64 avalanche step.
#[inline]
pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds any number of components into a master seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &p in parts {
        state = splitmix64(state ^ p);
    }
    state
}

/// The RNG used for all randomized generation and training in this crate.
/// ChaCha8 is portable and its `seed_from_u64` expansion is stable.
pub type Prng = rand_chacha::ChaCha8Rng;
