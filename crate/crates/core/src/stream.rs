//! Reproducible random substreams and ordered parallel replication.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator for replication `index` under `master_seed`.
///
/// Each index selects a distinct ChaCha stream of the same key, so streams
/// never overlap and do not depend on how work is scheduled.
pub fn substream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` for replications `first..first + reps`, each on its own
/// substream, and returns results in replication order.
pub fn replicate<T, F>(master_seed: u64, first: u64, reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    (first..first + reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(master_seed, r);
            f(r, &mut rng)
        })
        .collect()
}
