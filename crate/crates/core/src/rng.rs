//! Counter-based random numbers.
//!
//! Every trial gets its own stream derived from the run seed and the global
//! trial index, so results do not depend on how trials are split across
//! workers.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const COUNTER_STEP: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Herald draws and idle-gap lengths.
    Herald = 1,
    /// Photon numbers, routing and detection times of readouts.
    Readout = 2,
    /// Synthetic data for fit studies.
    Synthetic = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64, stream: Stream) -> Self {
        StreamKey(mix64(seed ^ mix64((stream as u64).wrapping_add(GOLDEN))))
    }

    #[inline]
    pub fn trial(&self, index: u64) -> TrialRng {
        TrialRng {
            base: mix64(self.0 ^ index.wrapping_mul(GOLDEN)),
            counter: 0,
        }
    }
}

/// Stream of draws for one trial of one run.
pub fn seed_stream(seed: u64, stream: Stream, trial_index: u64) -> TrialRng {
    StreamKey::new(seed, stream).trial(trial_index)
}

/// Random stream of a single trial.
#[derive(Debug, Clone)]
pub struct TrialRng {
    base: u64,
    counter: u64,
}

pub const UNIT_BITS: u32 = 53;
pub const UNIT_SCALE: f64 = (1u64 << UNIT_BITS) as f64;

impl TrialRng {
    /// 53 random bits, the first draw of the trial.
    #[inline]
    pub fn first_bits(&self) -> u64 {
        mix64(self.base) >> (64 - UNIT_BITS)
    }

    /// Moves past the first draw, which is consumed by [`first_bits`](Self::first_bits).
    #[inline]
    pub fn skip_first(&mut self) {
        if self.counter == 0 {
            self.counter = 1;
        }
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> (64 - UNIT_BITS)) as f64 / UNIT_SCALE
    }
}

impl RngCore for TrialRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let v = mix64(self.base.wrapping_add(self.counter.wrapping_mul(COUNTER_STEP)));
        self.counter += 1;
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Converts a probability into a threshold on 53-bit integers.
#[inline]
pub fn threshold(p: f64) -> u64 {
    (p.clamp(0.0, 1.0) * UNIT_SCALE).round() as u64
}
