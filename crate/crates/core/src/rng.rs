//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, replicate, lane, block)`. The key is derived from the seed and the
//! replicate, the ChaCha stream id from the lane, and the block selects a far
//! apart word offset. Work split into fixed-size blocks therefore draws the same
//! numbers no matter how many threads process it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Rows handled by one random block in data-parallel loops.
pub const BLOCK_ROWS: usize = 4096;

/// Word spacing between consecutive blocks of one lane (2^40 32-bit words).
const BLOCK_WORD_STRIDE: u128 = 1 << 40;

const LANE_SAMPLE: u64 = 0;
const LANE_RESAMPLE: u64 = 1;
const LANE_PREDICT: u64 = 2;
const LANE_SHUFFLE: u64 = 3;
const LANE_BRUTE_FORCE: u64 = 4;
const LANE_DATA: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed from a parent seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Addresses the streams of one independent estimator run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub replicate: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replicate: u64) -> Self {
        Self { seed, replicate }
    }

    fn rng(&self, kind: u64, index: u64, block: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut word = derive_seed(self.seed, self.replicate);
        for chunk in key.chunks_exact_mut(8) {
            word = splitmix64(word);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        // 8 bits of kind, 56 bits of index.
        rng.set_stream((kind << 56) | (index & ((1 << 56) - 1)));
        rng.set_word_pos(block as u128 * BLOCK_WORD_STRIDE);
        rng
    }

    /// Conditional draws for dimension `dim`, row block `block`.
    pub fn sampling(&self, dim: usize, block: usize) -> ChaCha8Rng {
        self.rng(LANE_SAMPLE, dim as u64, block as u64)
    }

    /// Bootstrap indices after the acceptance test of dimension `dim`.
    pub fn resampling(&self, dim: usize) -> ChaCha8Rng {
        self.rng(LANE_RESAMPLE, dim as u64, 0)
    }

    /// Test-point draws for test pattern `index`, row block `block`.
    pub fn prediction(&self, index: usize, block: usize) -> ChaCha8Rng {
        self.rng(LANE_PREDICT, index as u64, block as u64)
    }

    pub fn shuffle(&self) -> ChaCha8Rng {
        self.rng(LANE_SHUFFLE, 0, 0)
    }

    pub fn brute_force(&self, block: usize) -> ChaCha8Rng {
        self.rng(LANE_BRUTE_FORCE, 0, block as u64)
    }

    /// Synthetic data generation, one lane per named purpose.
    pub fn data(&self, purpose: u64) -> ChaCha8Rng {
        self.rng(LANE_DATA, purpose, 0)
    }
}
