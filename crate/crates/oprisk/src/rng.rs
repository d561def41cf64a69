//! Keyed random streams: every (seed, index, purpose) triple gets its own
//! ChaCha stream, so results do not depend on scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Sample = 0,
    Oracle = 1,
    Calibration = 2,
}

pub fn stream(master_seed: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((index << 2) | purpose as u64);
    rng
}
