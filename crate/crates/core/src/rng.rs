//! Deterministic random-stream derivation.
//!
//! Every stochastic component (population draws, bootstrap replicates,
//! Monte Carlo replications, RFF frequencies) receives its own ChaCha8
//! stream derived from a master seed plus a tag path. Results are therefore
//! independent of worker count and scheduling: stream identity depends only
//! on `(master, tags)`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent ChaCha8 stream from `(master, tags)`.
pub fn derive_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = mixed_state(master, tags);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Collapses `(master, tags)` into a single derived seed, for components
/// that take a plain `u64` seed.
pub fn mix_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = mixed_state(master, tags);
    splitmix64(&mut state)
}

/// A seeded Fisher–Yates permutation of `0..n` (used for train/holdout
/// splits).
pub fn seeded_permutation(n: usize, master: u64, tags: &[u64]) -> Vec<usize> {
    use rand::Rng;
    let mut rng = derive_rng(master, tags);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

fn mixed_state(master: u64, tags: &[u64]) -> u64 {
    let mut state = master ^ 0x5bf0_3635_d1a1_43f2;
    let _ = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(GAMMA).rotate_left(17);
        let _ = splitmix64(&mut state);
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let mut a = derive_rng(7, &[1, 2]);
        let mut b = derive_rng(7, &[1, 2]);
        for _ in 0..16 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn streams_differ_by_tag() {
        let mut a = derive_rng(7, &[1, 2]);
        let mut b = derive_rng(7, &[1, 3]);
        let mut c = derive_rng(8, &[1, 2]);
        let x = a.random::<u64>();
        assert_ne!(x, b.random::<u64>());
        assert_ne!(x, c.random::<u64>());
    }

    #[test]
    fn tag_path_is_not_flattened() {
        // (a, [b]) must differ from (a ^ b, []) style collapses
        let mut a = derive_rng(1, &[2, 3]);
        let mut b = derive_rng(1, &[3, 2]);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }
}
