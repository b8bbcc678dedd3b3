//! Counter-based, splittable random streams.
//!
//! Every path draws from its own ChaCha8 stream whose key is derived from
//! `(seed, label path, index)`. Nothing depends on thread scheduling, so an
//! estimator gives bit-identical output for any level of parallelism.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A node in a tree of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    key: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed),
        }
    }

    /// Child stream keyed by a label (estimator name, role, ...).
    pub fn derive(&self, label: &str) -> Self {
        Self {
            key: splitmix64(self.key ^ fnv1a(label.as_bytes())),
        }
    }

    /// Child stream keyed by an integer (path index, chunk, grid point).
    pub fn index(&self, i: u64) -> Self {
        Self {
            key: splitmix64(self.key.rotate_left(17) ^ splitmix64(i.wrapping_add(0x5851_F42D))),
        }
    }

    /// Child stream keyed by the bit patterns of a point's coordinates.
    pub fn point(&self, x: &[f64]) -> Self {
        x.iter()
            .fold(self.derive("point"), |acc, c| acc.index(c.to_bits()))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> PathRng {
        let mut seed = [0u8; 32];
        let mut k = self.key;
        for chunk in seed.chunks_mut(8) {
            k = splitmix64(k);
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
