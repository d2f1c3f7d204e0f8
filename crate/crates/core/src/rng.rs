//! Reproducible substreams for parallel simulation.
//!
//! Every sampler and estimator in the crate derives its randomness from an
//! explicit `(seed, stream)` pair: one ChaCha8 keyed by the seed, with the
//! 64-bit stream id selecting a disjoint counter stream. Work is split into
//! units with fixed stream ids and reduced in unit order, so results are
//! bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of batches used for batch-mean standard errors.
pub const N_BATCHES: u64 = 100;

/// The RNG for stream `stream` of the experiment keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for batch `batch` of the work unit with the given base.
/// Bases are spaced 2^32 apart so per-item streams never collide with
/// per-batch streams of another unit.
pub fn stream_id(base: u64, batch: u64) -> u64 {
    base.wrapping_shl(32).wrapping_add(batch)
}

/// Split `n` items into at most [`N_BATCHES`] contiguous batches; returns
/// the per-batch sizes (first batches absorb the remainder).
pub fn batch_sizes(n: u64) -> Vec<u64> {
    if n == 0 {
        return Vec::new();
    }
    let nb = N_BATCHES.min(n);
    let base = n / nb;
    let rem = n % nb;
    (0..nb).map(|b| base + u64::from(b < rem)).collect()
}
