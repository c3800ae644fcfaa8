//! Named, seeded random substreams.
//!
//! Every random draw in the library comes from a ChaCha8 generator keyed by
//! the scenario seed and addressed by a `(label, index)` pair, so the draws
//! of one component do not move when another component asks for more
//! numbers, and parallel trials reproduce regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Root of a family of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream root addressed by `label` and `index`.
    pub fn child(&self, label: &str, index: u64) -> SeedStream {
        SeedStream {
            seed: mix(self.seed ^ fnv1a(label.as_bytes()), index),
        }
    }

    /// Generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            chunk.copy_from_slice(&mix(self.seed, i as u64).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Shorthand for `self.child(label, index).rng()`.
    pub fn rng_for(&self, label: &str, index: u64) -> ChaCha8Rng {
        self.child(label, index).rng()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

// splitmix64 finalizer over (a, b)
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_add(b.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
