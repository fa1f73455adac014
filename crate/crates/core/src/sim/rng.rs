//! Per-trial random streams.
//!
//! Every trial gets its own ChaCha8 stream, keyed by the master seed and
//! selected by the trial index through the cipher's stream counter. A trial's
//! draws therefore never depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

pub fn trial_rng(master_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}
