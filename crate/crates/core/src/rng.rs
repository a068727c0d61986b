//! Counter-based random streams.
//!
//! Every random quantity in the toolkit is derived from a 64-bit seed through
//! the SplitMix64 finalizer, so any element of a stream can be regenerated
//! from `(seed, index)` alone. This is what lets perturbation vectors with
//! millions of coordinates be stored as a single `u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for `stream` from `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Sequential generator for a named sub-stream of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Sub-stream tags. Kept in one place so no two consumers share a stream.
pub mod tags {
    pub const INIT_HIDDEN: u64 = 1;
    pub const INIT_OUTPUT: u64 = 2;
    pub const PERTURBATIONS: u64 = 3;
    pub const POLICY: u64 = 4;
    pub const ENVIRONMENT: u64 = 5;
    pub const ORDERING: u64 = 6;
    pub const TEACHER: u64 = 7;
    pub const DIAGNOSTICS: u64 = 8;
}

/// An infinite ±1 sequence, addressable by index.
///
/// Element `j` is bit `j % 64` of `mix64(seed + (j / 64 + 1) * GOLDEN)`,
/// mapped `1 -> +1`, `0 -> -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RademacherStream {
    seed: u64,
}

impl RademacherStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline(always)]
    fn word(&self, block: u64) -> u64 {
        mix64(self.seed.wrapping_add(block.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// The `j`-th sign.
    pub fn sign(&self, j: usize) -> f64 {
        if (self.word((j / 64) as u64) >> (j % 64)) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Materializes elements `[offset, offset + len)`.
    pub fn materialize(&self, offset: usize, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        self.for_each_sign(offset, len, |i, s| out[i] = s);
        out
    }

    #[inline(always)]
    fn for_each_sign(&self, offset: usize, len: usize, mut f: impl FnMut(usize, f64)) {
        let mut i = 0;
        while i < len {
            let j = offset + i;
            let bit = j % 64;
            let take = (64 - bit).min(len - i);
            let mut w = self.word((j / 64) as u64) >> bit;
            for k in 0..take {
                // 1 -> +1.0, 0 -> -1.0
                f(i + k, ((w & 1) as f64) * 2.0 - 1.0);
                w >>= 1;
            }
            i += take;
        }
    }

    /// `Σ_i ε_{offset+i} (a_i - b_i)`.
    pub fn dot_diff(&self, a: &[f64], b: &[f64], offset: usize) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = 0.0;
        self.for_each_sign(offset, a.len(), |i, s| acc += s * (a[i] - b[i]));
        acc
    }

    /// `out_i += alpha * ε_{offset+i}`.
    pub fn add_scaled(&self, alpha: f64, out: &mut [f64], offset: usize) {
        let len = out.len();
        self.for_each_sign(offset, len, |i, s| out[i] += alpha * s);
    }
}
