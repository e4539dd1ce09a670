//! Seeded, splittable random streams.
//!
//! Every simulation in the crate is driven by a [`Seed`]. A seed can be split
//! into child seeds by index, and each child yields an independent ChaCha8
//! stream. Work is always partitioned into fixed chunks keyed by index, so the
//! numbers drawn never depend on how many threads happen to run the chunks.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Root or derived seed for a family of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

/// Well-known child indices, so unrelated consumers of one seed never share a stream.
pub(crate) mod lane {
    pub const NOISE: u64 = 0x006e_6f69_7365;
    pub const REFERENCE: u64 = 0x0072_6566_6572;
    pub const TRIALS: u64 = 0x0074_7269_616c;
    pub const CELLS: u64 = 0x6365_6c6c;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    /// Draws a fresh seed from operating-system entropy.
    pub fn from_entropy() -> Self {
        Seed(rand::rng().next_u64())
    }

    /// Deterministically derives the `index`-th child seed.
    pub fn child(self, index: u64) -> Seed {
        Seed(splitmix64(
            splitmix64(self.0) ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }

    /// The random stream owned by this seed.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Shorthand for `self.child(index).rng()`.
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        self.child(index).rng()
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

/// A source of uniform draws on the open interval (0, 1).
///
/// Inverse-CDF samplers consume exactly one draw per variate, which keeps the
/// mapping from stream position to sample fixed.
pub trait UniformSource {
    fn next_open01(&mut self) -> f64;
}

impl<R: RngCore + ?Sized> UniformSource for R {
    fn next_open01(&mut self) -> f64 {
        self.sample(Open01)
    }
}

/// Replays a fixed sequence of uniforms, cycling when exhausted.
///
/// Used to pin a noise draw, e.g. `FixedUniform::new(vec![0.5])` makes any
/// symmetric inverse-CDF sampler return its median.
#[derive(Debug, Clone)]
pub struct FixedUniform {
    values: Vec<f64>,
    pos: usize,
}

impl FixedUniform {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "FixedUniform needs at least one value");
        assert!(
            values.iter().all(|u| *u > 0.0 && *u < 1.0),
            "FixedUniform values must lie in (0, 1)"
        );
        FixedUniform { values, pos: 0 }
    }

    pub fn median() -> Self {
        FixedUniform::new(vec![0.5])
    }
}

impl UniformSource for FixedUniform {
    fn next_open01(&mut self) -> f64 {
        let u = self.values[self.pos % self.values.len()];
        self.pos += 1;
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_are_distinct_and_stable() {
        let root = Seed(7);
        assert_eq!(root.child(3), Seed(7).child(3));
        assert_ne!(root.child(3), root.child(4));
        assert_ne!(root.child(0), root);
        assert_ne!(Seed(0).child(0), Seed(0));
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(Seed(11).stream(2), |r, _| Some(r.next_u64()))
            .collect();
        let b: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(Seed(11).stream(2), |r, _| Some(r.next_u64()))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn open01_never_hits_endpoints() {
        let mut rng = Seed(1).rng();
        for _ in 0..100_000 {
            let u = rng.next_open01();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn fixed_uniform_cycles() {
        let mut f = FixedUniform::new(vec![0.25, 0.75]);
        assert_eq!(f.next_open01(), 0.25);
        assert_eq!(f.next_open01(), 0.75);
        assert_eq!(f.next_open01(), 0.25);
    }
}
