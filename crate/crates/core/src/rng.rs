//! Splittable deterministic random streams.
//!
//! Every random decision in a simulation is drawn from a stream addressed by
//! a path of integer tags under a master seed. Child streams are derived by
//! counter-style key mixing, never by drawing from the parent, so the set of
//! streams (and everything sampled from them) is independent of thread count
//! and evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for key derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A point in the stream tree. Cheap to copy; `child` derives sub-streams,
/// `rng` instantiates a generator at this point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    state: u64,
}

impl StreamKey {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey {
            state: splitmix64(seed),
        }
    }

    pub fn child(&self, tag: u64) -> Self {
        StreamKey {
            state: splitmix64(self.state ^ splitmix64(tag ^ 0xa5a5_a5a5_a5a5_a5a5)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut z = self.state;
        for chunk in seed.chunks_exact_mut(8) {
            z = splitmix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
