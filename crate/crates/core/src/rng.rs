//! Seeded, splittable random streams.
//!
//! Every independent unit of work (a sweep point, a noise realization) gets
//! its own ChaCha stream addressed by `(seed, stream)`, so results do not
//! depend on how the work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
