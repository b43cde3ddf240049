//! Keyed random streams.
//!
//! Every random quantity is drawn from a stream addressed by a master seed and
//! a tuple of integer keys (replicate, coordinate, chain, block, ...), never by
//! call order. Results are then independent of scheduling and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Generator type used for all streams.
pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a key path into a 64-bit stream id.
pub fn derive_key(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(seed), |acc, &k| {
        splitmix64(acc ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

/// Independent generator for `(seed, keys...)`.
pub fn stream(seed: u64, keys: &[u64]) -> StreamRng {
    let k = derive_key(seed, keys);
    let mut bytes = [0u8; 32];
    for (i, chunk) in bytes.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(k.wrapping_add(i as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Standard normal variates addressed by coordinate index: coordinate `i`
/// always receives the same value for a given `(seed, replicate)`, however
/// many coordinates are requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub replicate: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, replicate: u64) -> Self {
        Self { seed, replicate }
    }

    /// Noise for coordinate `i` (1-based).
    pub fn normal(&self, i: usize) -> f64 {
        let mut rng = stream(self.seed, &[self.replicate, i as u64]);
        StandardNormal.sample(&mut rng)
    }

    pub fn normals(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|i| self.normal(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn noise_is_prefix_stable() {
        let s = NoiseStream::new(42, 0);
        let short = s.normals(10);
        let long = s.normals(60);
        assert_eq!(short[..], long[..10]);
        assert_ne!(NoiseStream::new(42, 1).normal(1), short[0]);
    }
}
