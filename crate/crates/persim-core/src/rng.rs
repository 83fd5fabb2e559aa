//! Seeded, splittable random-number streams.
//!
//! Every experiment derives its randomness from a single root seed. A trial
//! owns a fixed set of named substreams (instance, data, noise, ...), each an
//! independent ChaCha stream, so that
//!
//! - the same `(seed, trial)` pair always regenerates the same trial, and
//! - trials can run in parallel in any order without changing results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Substream labels within one trial. Values must stay below
/// [`TrialRng::CHANNELS`]; each label owns one ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Problem-instance draws (means, indices).
    Instance = 0,
    /// Per-person training data.
    Data = 1,
    /// Mechanism noise.
    Noise = 2,
    /// Fresh (out-of-training) samples for attacks.
    Fresh = 3,
    /// Test-task data for metalearning runs.
    TestTask = 4,
    /// Auxiliary label draws (classification transforms).
    Labels = 5,
    /// Mechanism noise for the resampled run of an uncoupled attack trial.
    NoiseResampled = 6,
}

/// One stream keyed by `(seed, stream_id)`. ChaCha's native 64-bit stream
/// parameter guarantees independence across ids for a fixed seed.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Factory for one trial's named substreams.
#[derive(Debug, Clone, Copy)]
pub struct TrialRng {
    seed: u64,
    trial: u64,
}

impl TrialRng {
    /// Channels reserved per trial; stream ids are `trial * CHANNELS + channel`.
    pub const CHANNELS: u64 = 8;

    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    /// The stream id backing `channel`, recorded in trial provenance.
    pub fn stream_id(&self, channel: Channel) -> u64 {
        self.trial
            .wrapping_mul(Self::CHANNELS)
            .wrapping_add(channel as u64)
    }

    pub fn channel(&self, channel: Channel) -> ChaCha12Rng {
        stream_rng(self.seed, self.stream_id(channel))
    }
}
