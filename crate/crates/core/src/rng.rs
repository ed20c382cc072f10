//! Deterministic random-stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose seed is
//! a hash of (root seed, purpose label, indices...). Two streams that differ
//! in any component are unrelated, so parallel trials never share state and
//! results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash-chained identifier of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(mix(seed))
    }

    pub fn label(self, label: &str) -> Self {
        // FNV-1a over the bytes, then folded into the chain.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        StreamKey(mix(self.0 ^ mix(h)))
    }

    pub fn index(self, i: u64) -> Self {
        StreamKey(mix(self.0.rotate_left(17) ^ mix(i)))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Shorthand for `StreamKey::root(seed).label(label).rng()`.
pub fn stream(seed: u64, label: &str) -> Rng {
    StreamKey::root(seed).label(label).rng()
}
