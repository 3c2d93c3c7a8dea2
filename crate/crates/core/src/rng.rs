//! Counter-based random streams keyed by `(master_seed, stream_id)`.
//!
//! Each stream is an independent ChaCha8 keystream: the master seed fixes the
//! key and the stream id selects the ChaCha stream (nonce), so any stream can
//! be produced on any worker without touching shared state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Seed family for a sub-task: a fresh master key derived from this
    /// `(master_seed, stream_id)` and a domain tag, with stream 0.
    ///
    /// Use [`SeedSpec::with_stream`] on the result to index draws inside the family.
    pub fn derive(&self, tag: u64) -> SeedSpec {
        let mixed = splitmix64(
            splitmix64(self.master_seed ^ 0x9e37_79b9_7f4a_7c15)
                ^ splitmix64(self.stream_id.wrapping_add(0x632b_e59b_d9b4_e019))
                ^ splitmix64(tag.wrapping_mul(0xd1b5_4a32_d192_ed03)),
        );
        SeedSpec::new(mixed, 0)
    }

    pub fn with_stream(&self, stream_id: u64) -> SeedSpec {
        SeedSpec::new(self.master_seed, stream_id)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `count` i.i.d. standard normal variates from the stream `seed`.
pub fn gaussian_stream(seed: SeedSpec, count: usize) -> Vec<f64> {
    let mut rng = seed.rng();
    StandardNormal.sample_iter(&mut rng).take(count).collect()
}

/// [`gaussian_stream`] converted to the working scalar type.
pub fn gaussian_stream_as<T: Scalar>(seed: SeedSpec, count: usize) -> Vec<T> {
    let mut rng = seed.rng();
    (0..count)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::lit(v)
        })
        .collect()
}
