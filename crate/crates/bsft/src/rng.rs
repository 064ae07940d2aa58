//! Named, splittable random streams derived from one 64-bit seed.
//!
//! A stream is a pure function of the seed and the path of labels and indices
//! leading to it, so any sub-procedure can be rerun in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix(seed),
        }
    }

    pub fn child(&self, label: &str) -> Self {
        Self {
            key: splitmix(self.key ^ fnv(label)),
        }
    }

    pub fn index(&self, i: u64) -> Self {
        Self {
            key: splitmix(self.key.rotate_left(17) ^ splitmix(i)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut z = self.key;
        for chunk in seed.chunks_mut(8) {
            z = splitmix(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
