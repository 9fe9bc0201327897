//! Seeded random streams shared by data generation, initialization and shuffling.
//!
//! Every stream is a PCG64 (XSL-RR 128/64) generator constructed as
//! `Pcg64::new(state, stream)` where `state` is the 64-bit seed widened with
//! a fixed high word and `stream` selects an independent substream. The
//! derived samplers are spelled out so other implementations can reproduce
//! the exact sequences:
//!
//! * `unit`: `(next_u64 >> 11) * 2^-53`, a value in `[0, 1)`.
//! * `uniform(lo, hi)`: `lo + (hi - lo) * unit`.
//! * `normal`: Box–Muller on two consecutive `unit` draws, `u1` replaced by
//!   `1 - u1` so the logarithm argument lies in `(0, 1]`; only the cosine
//!   branch is used, one normal per two uniforms.
//! * `below(n)`: `(next_u64 as u128 * n as u128) >> 64`.

use rand_core::Rng;
use rand_pcg::Pcg64;

/// Substream identifiers. Distinct substreams never overlap for a given seed.
pub mod stream {
    pub const TRAIN_DATA: u64 = 1;
    pub const TEST_DATA: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const FIXTURE: u64 = 5;
}

const SEED_HIGH_WORD: u128 = 0x853c_49e6_748f_ea9b;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Pcg64,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let state = (SEED_HIGH_WORD << 64) | u128::from(seed);
        Self {
            inner: Pcg64::new(state, u128::from(stream)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Integer in `0..n`; `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Fisher–Yates from the last index down, using [`SeededRng::below`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of a label.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Folds labels and an index into a base seed: `h = mix64(base)`, then
/// `h = mix64(h ^ fnv1a(label))` for each label, then `mix64(h ^ index)`.
pub fn derive_seed(base: u64, labels: &[&str], index: u64) -> u64 {
    let mut h = mix64(base);
    for label in labels {
        h = mix64(h ^ label_hash(label));
    }
    mix64(h ^ index)
}
