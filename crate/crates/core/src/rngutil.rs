//! Seed derivation so every pipeline stage draws from the single run seed
//! without sharing RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a per-stage seed from the run seed and a stage label (FNV-1a).
pub fn stage_seed(base: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ base
}

/// Deterministic RNG for a given stage of a run.
pub fn stage_rng(base: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stage_seed(base, stage))
}
