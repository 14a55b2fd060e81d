//! Reproducible random streams.
//!
//! Every sample draws from its own ChaCha8 stream: the key comes from
//! `ChaCha8Rng::seed_from_u64(seed)` and the 64-bit stream id is the sample
//! index (with the top bit set for the uniform reference population). Results
//! depend only on `(seed, index)`, never on how samples are spread over workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const REFERENCE_STREAM: u64 = 1 << 63;

pub fn sample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index & !REFERENCE_STREAM);
    rng
}

/// Stream for the uniform (Lebesgue) comparison population, disjoint from
/// [`sample_stream`] for the same seed.
pub fn reference_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index | REFERENCE_STREAM);
    rng
}

/// Runs `f` on a pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
