//! Deterministic random streams keyed by `(seed, stream_id)`.
//!
//! Each stream is a ChaCha8 keystream: the seed fixes the key and the stream id
//! selects one of 2^64 disjoint counter ranges, so streams never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Owned random stream; not shared between threads.
#[derive(Clone, Debug)]
pub struct SeededStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        SeededStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn sample<D: Distribution<f64>>(&mut self, dist: &D) -> f64 {
        dist.sample(&mut self.rng)
    }

    /// Fills `out` with N(0, variance) draws.
    pub fn fill_gaussian(&mut self, out: &mut [f64], variance: f64) {
        let sd = variance.sqrt();
        for x in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *x = sd * z;
        }
    }
}

/// Draws a vector of i.i.d. N(0, variance) entries.
pub fn gaussian_vec(stream: &mut SeededStream, d: usize, variance: f64) -> Result<Vector> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::param(format!("variance must be >= 0, got {variance}")));
    }
    if d == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    let mut v = vec![0.0; d];
    stream.fill_gaussian(&mut v, variance);
    Ok(Vector::from_raw(v))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a list of indices into a child seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
