//! Deterministic seed derivation for parallel substreams.
//!
//! Every stochastic component of the crate draws from a ChaCha stream whose
//! seed is derived from a master seed plus the coordinates of the work item
//! (window index, alpha index, innovation source, path index). Results are
//! therefore bit-identical no matter how work is scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a stable, platform-independent mixer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and the coordinates in `parts`.
///
/// The derivation is injective enough for simulation purposes and is stable
/// across platforms and releases (no `std::hash` involvement).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = mix64(master ^ 0x6c62_272e_07bb_0142);
    for (i, &p) in parts.iter().enumerate() {
        state = mix64(state ^ p.wrapping_add(0x100 + i as u64));
    }
    state
}

/// A seeded generator for the substream identified by `parts`.
pub fn substream(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}
