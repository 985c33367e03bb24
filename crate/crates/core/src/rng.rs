//! Deterministic random number streams.
//!
//! Everything stochastic in this crate draws from a [`ChaCha12Rng`] substream
//! derived from a master seed and a path of indices (trial number, method slot,
//! chain id, ...). Substreams are independent by construction and bit-stable
//! across platforms, so a 50-trial experiment is reproducible per trial.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Mixes a path of indices into a single 64-bit stream id (splitmix64 chain).
fn mix(mut h: u64, v: u64) -> u64 {
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(v);
    let mut z = h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A master seed from which per-task substreams are split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seed(pub u64);

impl Seed {
    /// Derives the RNG for `path`, e.g. `seed.stream(&[trial, METHOD_GIBBS])`.
    ///
    /// The same (seed, path) pair always yields the same generator.
    pub fn stream(self, path: &[u64]) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.0);
        let mut id = mix(0, self.0);
        for &p in path {
            id = mix(id, p);
        }
        rng.set_stream(id);
        rng
    }

    /// Shorthand for a single-index substream.
    pub fn substream(self, index: u64) -> ChaCha12Rng {
        self.stream(&[index])
    }
}
