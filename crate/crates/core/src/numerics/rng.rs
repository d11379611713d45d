//! SplitMix64: a 64-bit-state counter generator (Steele, Lea & Flood 2014).
//!
//! State advances by the odd constant 0x9E3779B97F4A7C15; each output is
//! the state passed through a two-round xor-shift-multiply finaliser.
//! Independent streams come from [`derive_seed`], which finalises
//! `master + (index + 1) * GAMMA`, so a stream depends only on its index
//! and results stay reproducible under any thread scheduling.

use rand::RngCore;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for sub-stream `index` of `master`.
    pub fn stream(master: u64, index: u64) -> Self {
        Self::new(derive_seed(master, index))
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
