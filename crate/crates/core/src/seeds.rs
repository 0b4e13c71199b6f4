//! Counter-based seed splitting.
//!
//! All randomness in a campaign flows from one root seed. Sub-experiments
//! (prior draws, per-iteration acquisition searches, Monte Carlo runs) each
//! get their own ChaCha stream keyed by a stream counter, so they are
//! independently reproducible and safe to evaluate in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for sub-experiment `stream` of the experiment seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
