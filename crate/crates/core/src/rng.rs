//! Counter-based random streams.
//!
//! Every trial draws from its own ChaCha8 stream selected by
//! `(master seed, trial index)`, so results do not depend on how trials are
//! scheduled across threads. Auxiliary randomness (supremum families,
//! random instance sets) uses streams with the top bit set, disjoint from
//! every trial stream.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const AUX_STREAM: u64 = 1 << 63;

/// Trials per work item in [`par_blocks`].
pub const BLOCK_SIZE: u64 = 256;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    debug_assert!(trial < AUX_STREAM);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn aux_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(AUX_STREAM | tag);
    rng
}

/// Runs `work` over fixed blocks of `0..trials` in parallel and returns the
/// block results in block order.
pub fn par_blocks<T, F>(trials: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    let blocks = trials.div_ceil(BLOCK_SIZE);
    (0..blocks)
        .into_par_iter()
        .map(|b| work(b * BLOCK_SIZE..((b + 1) * BLOCK_SIZE).min(trials)))
        .collect()
}

/// [`par_blocks`] followed by flattening, preserving trial order.
pub fn par_trials<T, F>(trials: u64, per_trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    par_blocks(trials, |range| range.map(&per_trial).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}
