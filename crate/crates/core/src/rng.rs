//! Deterministic random streams.
//!
//! Every replicate draws from its own ChaCha stream keyed by `(seed, stream)`,
//! so results do not depend on how replicates are split across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
