//! Deterministic, counter-addressed random streams.
//!
//! Every stochastic routine derives its generator from a small set of integers
//! (base seed, purpose tag, stream index) instead of drawing from a shared
//! mutable generator. Streams can therefore be opened in any order, from any
//! thread, and always replay the same draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Purpose tags keep unrelated streams from colliding on the same key.
const PURPOSE_DRIVER: u64 = 0x4452_4956_4552_0001;
const PURPOSE_SCENARIO: u64 = 0x5343_454e_4152_0002;
const PURPOSE_PROBE: u64 = 0x5052_4f42_4553_0003;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Expands `(seed, purpose, index)` into a 32-byte ChaCha key.
fn keyed_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ purpose.rotate_left(17) ^ index.rotate_left(43);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Gaussian increments of variance `dt` for one driver path.
///
/// The stream is keyed by `(seed, path_index)` only, so the same driver is
/// replayed for every scenario a path is evaluated under.
pub fn driver_increments(seed: u64, path_index: u64, n: usize, dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    fill_driver_increments(seed, path_index, n, dt, &mut out);
    out
}

/// Same as [`driver_increments`] but reuses the caller's buffer.
pub fn fill_driver_increments(seed: u64, path_index: u64, n: usize, dt: f64, out: &mut Vec<f64>) {
    let mut rng = keyed_rng(seed, PURPOSE_DRIVER, path_index);
    let scale = dt.sqrt();
    out.clear();
    out.reserve(n);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        out.push(scale * z);
    }
}

/// Generator for the scenario-sampling stream with the given index.
pub fn scenario_rng(seed: u64, scenario_index: u64) -> ChaCha8Rng {
    keyed_rng(seed, PURPOSE_SCENARIO, scenario_index)
}

/// Generator for coefficient validation probes.
pub fn probe_rng(seed: u64) -> ChaCha8Rng {
    keyed_rng(seed, PURPOSE_PROBE, 0)
}
