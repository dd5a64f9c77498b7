//! Counter-based random streams. Every consumer derives its own ChaCha stream
//! from `(seed, stream id)` so results never depend on consumption order
//! elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const STREAM_POPULATION: u64 = 1;
pub const STREAM_CHANNEL: u64 = 2;
pub const STREAM_POLICY: u64 = 3;
pub const STREAM_MINIBATCH: u64 = 4;
pub const STREAM_INIT: u64 = 5;
pub const STREAM_EVAL: u64 = 6;

/// Stream id for worker `worker` of kind `base`.
pub fn worker_stream(base: u64, worker: usize) -> u64 {
    (base << 32) | worker as u64
}

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
