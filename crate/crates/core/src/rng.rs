//! Addressable random streams for ensemble runs.
//!
//! Path `i` of a run seeded with `root_seed` reads ChaCha8 stream `i` under a
//! key expanded from `root_seed`. Every draw consumes exactly one 64-bit word,
//! so the words used by step `k` sit at a fixed offset and any step can be
//! replayed on its own with [`PathStream::seek`].

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Generator family recorded in run metadata.
pub const RNG_FAMILY: &str = "chacha8/rand_chacha-0.9/stream=path/box-muller-u64";

#[derive(Debug, Clone)]
pub struct PathStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl PathStream {
    pub fn new(root_seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
        rng.set_stream(path);
        Self { rng, spare: None }
    }

    /// Jump to the `word`-th 64-bit draw of this stream.
    pub fn seek(&mut self, word: u64) {
        self.rng.set_word_pos(u128::from(word) * 2);
        self.spare = None;
    }

    /// Number of 64-bit words consumed so far.
    pub fn position(&self) -> u64 {
        (self.rng.get_word_pos() / 2) as u64
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box-Muller. Draws come in pairs; a pending spare is
    /// discarded by [`PathStream::align`] so per-step word counts stay fixed.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * self.uniform().ln()).sqrt();
        let (s, c) = (TAU * self.uniform()).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn align(&mut self) {
        self.spare = None;
    }

    /// Words consumed by `count` normals followed by [`PathStream::align`].
    pub const fn words_for_normals(count: usize) -> u64 {
        (count.div_ceil(2) * 2) as u64
    }
}
