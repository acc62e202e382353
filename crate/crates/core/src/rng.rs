//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by the
//! user seed, with a distinct 64-bit stream id per purpose. The stream id
//! packs a purpose tag in the top byte and an index (view, block, trial)
//! in the low bits, so the noise of view `k` never shares a keystream with
//! the signal or with another view. Monte Carlo trials derive their own
//! base seed with [`trial_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Signal entries.
    Signal,
    /// GOE / Gaussian noise of observation view `k`.
    Noise(u32),
    /// Diagonal-block noise of an embedded asymmetric view `k` (second block).
    NoiseAux(u32),
    /// AMP side-information initialization.
    Init,
    /// Monte Carlo estimators living in the library.
    MonteCarlo(u32),
    /// Optimizer restarts.
    Restart(u32),
}

impl Stream {
    fn id(self) -> u64 {
        let (tag, idx) = match self {
            Stream::Signal => (1u64, 0u32),
            Stream::Noise(k) => (2, k),
            Stream::NoiseAux(k) => (3, k),
            Stream::Init => (4, 0),
            Stream::MonteCarlo(k) => (5, k),
            Stream::Restart(k) => (6, k),
        };
        (tag << 56) | idx as u64
    }
}

/// Generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Base seed of Monte Carlo trial `trial` (SplitMix64 finalizer).
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
