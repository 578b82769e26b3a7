//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 generator keyed by a
//! `u64` seed. Independent work items (Monte Carlo trials, experiment trials)
//! take separate ChaCha streams of the same key, so results do not depend on
//! how the items are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Generator for `stream` under key `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for the default stream of `seed`.
pub fn seeded(seed: u64) -> ChaCha20Rng {
    stream(seed, 0)
}

/// Seeds for the sub-tasks of work item `index`: the `k`-th entry is the
/// `k`-th word of stream `index + 1` (stream 0 is left to [`seeded`]).
pub fn child_seeds<const K: usize>(seed: u64, index: u64) -> [u64; K] {
    let mut rng = stream(seed, index + 1);
    let mut out = [0u64; K];
    for s in out.iter_mut() {
        *s = rng.next_u64();
    }
    out
}
