//! Monte-Carlo inference for the private statistic.
//!
//! Under the null hypothesis the released statistic is approximately
//! `Normal(0, n(n+1)(2n+1)/6) + Lap(2n/ε)`. The convolution has no convenient
//! closed form, so `c` draws are simulated, sorted once, and every p-value or
//! critical value query is a binary search or an order statistic.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::privacy::{pratt_noise, private_pratt_statistic_with, PrivacyParams};
use crate::ranks::PairedDataset;
use crate::rng::{lane, Seed, UniformSource};

/// Largest reference size accepted by default (8 bytes per draw, plus the
/// same again for the sorted magnitudes).
pub const DEFAULT_MAX_DRAWS: usize = 200_000_000;

/// Draws generated per independent substream.
const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// Upper tail only: `W >= w`.
    OneSided,
    /// Both tails: `|W| >= |w|`.
    #[default]
    TwoSided,
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sidedness::OneSided => "one",
            Sidedness::TwoSided => "two",
        })
    }
}

impl FromStr for Sidedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "one-sided" | "one_sided" => Ok(Sidedness::OneSided),
            "two" | "two-sided" | "two_sided" => Ok(Sidedness::TwoSided),
            other => Err(Error::param("sidedness", other, "expected `one` or `two`")),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(
            "alpha",
            alpha,
            "significance level must lie in (0, 1)",
        ))
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Standard normal inverse CDF.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", q, "quantile level must lie in (0, 1)"));
    }
    Ok(standard_normal().inverse_cdf(q))
}

pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Null standard deviation of a signed-rank sum over `n` ranked rows,
/// `sqrt(n(n+1)(2n+1)/6)`.
pub fn null_sigma(n: usize) -> f64 {
    let n = n as f64;
    (n * (n + 1.0) * (2.0 * n + 1.0) / 6.0).sqrt()
}

/// Sorted Monte-Carlo draws of the private statistic under the null.
#[derive(Debug)]
pub struct ReferenceDistribution {
    n: usize,
    epsilon: f64,
    seed: Seed,
    draws: Vec<f64>,
    magnitudes: OnceLock<Vec<f64>>,
}

impl Clone for ReferenceDistribution {
    fn clone(&self) -> Self {
        ReferenceDistribution {
            n: self.n,
            epsilon: self.epsilon,
            seed: self.seed,
            draws: self.draws.clone(),
            magnitudes: OnceLock::new(),
        }
    }
}

impl PartialEq for ReferenceDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.epsilon.to_bits() == other.epsilon.to_bits()
            && self.seed == other.seed
            && self.draws.len() == other.draws.len()
            && self
                .draws
                .iter()
                .zip(&other.draws)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl ReferenceDistribution {
    /// Wraps externally produced draws, e.g. from a cache file.
    pub fn from_sorted_draws(n: usize, epsilon: f64, seed: Seed, draws: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", n, "must be at least 1"));
        }
        PrivacyParams::new(epsilon)?;
        if draws.is_empty() {
            return Err(Error::EmptyInput(
                "a reference distribution needs at least one draw",
            ));
        }
        if draws.iter().any(|x| !x.is_finite()) {
            return Err(Error::param(
                "draws",
                "non-finite",
                "all draws must be finite",
            ));
        }
        if draws.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param(
                "draws",
                "unsorted",
                "draws must be sorted nondecreasing",
            ));
        }
        Ok(ReferenceDistribution {
            n,
            epsilon,
            seed,
            draws,
            magnitudes: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c(&self) -> usize {
        self.draws.len()
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    /// `|draws|`, sorted, built on first use by merging the two signed halves.
    pub fn sorted_magnitudes(&self) -> &[f64] {
        self.magnitudes.get_or_init(|| {
            let split = self.draws.partition_point(|&x| x < 0.0);
            let (neg, pos) = self.draws.split_at(split);
            let mut out = Vec::with_capacity(self.draws.len());
            let mut neg = neg.iter().rev().map(|x| -x).peekable();
            let mut pos = pos.iter().copied().peekable();
            loop {
                match (neg.peek(), pos.peek()) {
                    (Some(a), Some(b)) if a <= b => out.extend(neg.next()),
                    (_, Some(_)) => out.extend(pos.next()),
                    (Some(_), None) => out.extend(neg.next()),
                    (None, None) => break,
                }
            }
            out
        })
    }

    pub fn mean(&self) -> f64 {
        self.draws.iter().sum::<f64>() / self.c() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let c = self.c() as f64;
        (self.draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (c - 1.0).max(1.0)).sqrt()
    }

    /// Fraction of draws at least as extreme as `w_tilde`.
    pub fn p_value(&self, w_tilde: f64, sidedness: Sidedness) -> f64 {
        let c = self.c();
        let count = match sidedness {
            Sidedness::OneSided => c - self.draws.partition_point(|&x| x < w_tilde),
            Sidedness::TwoSided => {
                let t = w_tilde.abs();
                let upper = c - self.draws.partition_point(|&x| x < t);
                let lower = self.draws.partition_point(|&x| x <= -t);
                // at t == 0 every draw is counted by `upper` or `lower`, zeros twice
                (upper + lower).min(c)
            }
        };
        count as f64 / c as f64
    }

    /// Lower empirical `1 - alpha` quantile: the `ceil((1 - alpha) c)`-th
    /// order statistic of the draws (one-sided) or of their magnitudes
    /// (two-sided).
    pub fn critical_value(
        &self,
        alpha: f64,
        sidedness: Sidedness,
        normalized: bool,
    ) -> Result<CriticalValue> {
        check_alpha(alpha)?;
        let sorted = match sidedness {
            Sidedness::OneSided => &self.draws[..],
            Sidedness::TwoSided => self.sorted_magnitudes(),
        };
        let c = sorted.len();
        let rank = order_statistic_rank(alpha, c);
        let mut value = sorted[rank - 1];
        if normalized {
            value /= null_sigma(self.n);
        }
        Ok(CriticalValue {
            alpha,
            sidedness,
            value,
            normalized,
        })
    }
}

/// 1-based rank `ceil((1 - alpha) c)`, clamped to `1..=c`.
pub(crate) fn order_statistic_rank(alpha: f64, c: usize) -> usize {
    let raw = ((1.0 - alpha) * c as f64).ceil();
    (raw as usize).clamp(1, c)
}

pub fn simulate_reference(
    n: usize,
    params: PrivacyParams,
    c: usize,
    seed: Seed,
) -> Result<ReferenceDistribution> {
    simulate_reference_capped(n, params, c, seed, DEFAULT_MAX_DRAWS)
}

/// Draws `c` samples of `Normal(0, null_sigma(n)^2) + Lap(2n/ε)` and sorts them.
///
/// The draws are split into fixed-size chunks, each with its own substream of
/// `seed`, so the result is identical for any thread count.
pub fn simulate_reference_capped(
    n: usize,
    params: PrivacyParams,
    c: usize,
    seed: Seed,
    max_draws: usize,
) -> Result<ReferenceDistribution> {
    if n == 0 {
        return Err(Error::param("n", n, "must be at least 1"));
    }
    if c == 0 {
        return Err(Error::param("c", c, "need at least one reference draw"));
    }
    if c > max_draws {
        return Err(Error::Resource(format!(
            "{c} reference draws exceed the configured cap of {max_draws}"
        )));
    }
    let sigma = null_sigma(n);
    let noise = pratt_noise(n, params);
    let root = seed.child(lane::REFERENCE);

    let mut draws = vec![0.0; c];
    draws
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = root.stream(chunk as u64);
            for slot in out {
                let z: f64 = StandardNormal.sample(&mut rng);
                *slot = sigma * z + noise.sample(&mut rng);
            }
        });
    draws.par_sort_unstable_by(f64::total_cmp);

    Ok(ReferenceDistribution {
        n,
        epsilon: params.epsilon(),
        seed,
        draws,
        magnitudes: OnceLock::new(),
    })
}

/// Something that hands out reference distributions keyed by `(n, ε)`.
pub trait ReferenceSource: Sync {
    fn reference(&self, n: usize, params: PrivacyParams) -> Result<Arc<ReferenceDistribution>>;
}

/// Builds references on demand with a fixed `c` and seed and keeps them in memory.
#[derive(Debug)]
pub struct MemoryReferences {
    c: usize,
    seed: Seed,
    built: Mutex<HashMap<(usize, u64), Arc<ReferenceDistribution>>>,
}

impl MemoryReferences {
    pub fn new(c: usize, seed: Seed) -> Self {
        MemoryReferences {
            c,
            seed,
            built: Mutex::new(HashMap::new()),
        }
    }

    pub fn c(&self) -> usize {
        self.c
    }
}

impl ReferenceSource for MemoryReferences {
    fn reference(&self, n: usize, params: PrivacyParams) -> Result<Arc<ReferenceDistribution>> {
        let key = (n, params.epsilon().to_bits());
        if let Some(r) = self.built.lock().expect("reference map poisoned").get(&key) {
            return Ok(Arc::clone(r));
        }
        // built outside the lock; a racing builder produces identical draws
        let r = Arc::new(simulate_reference(n, params, self.c, self.seed)?);
        let mut map = self.built.lock().expect("reference map poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(r)))
    }
}

pub fn p_value(w_tilde: f64, reference: &ReferenceDistribution, sidedness: Sidedness) -> f64 {
    reference.p_value(w_tilde, sidedness)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub value: f64,
    /// Divided by `null_sigma(n)`.
    pub normalized: bool,
}

pub fn critical_value(
    reference: &ReferenceDistribution,
    alpha: f64,
    sidedness: Sidedness,
    normalized: bool,
) -> Result<CriticalValue> {
    reference.critical_value(alpha, sidedness, normalized)
}

/// Output of the complete private test. Contains only the released
/// statistic and public parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivateTestResult {
    pub w_tilde: f64,
    pub p: f64,
    pub n: usize,
    pub epsilon: f64,
    pub c: usize,
    pub seed: Option<Seed>,
    pub sidedness: Sidedness,
}

impl PrivateTestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

/// Releases the private statistic and scores it against a fresh reference.
///
/// The reference always uses the full row count `n`, whatever the number of
/// zero differences; heavy ties only make the test conservative.
pub fn complete_test(
    dataset: &PairedDataset,
    params: PrivacyParams,
    c: usize,
    seed: Seed,
    sidedness: Sidedness,
) -> Result<PrivateTestResult> {
    let reference = simulate_reference(dataset.n(), params, c, seed)?;
    complete_test_against(dataset, params, &reference, seed, sidedness)
}

/// Complete test against an existing reference (built for the same `n` and ε).
pub fn complete_test_against(
    dataset: &PairedDataset,
    params: PrivacyParams,
    reference: &ReferenceDistribution,
    seed: Seed,
    sidedness: Sidedness,
) -> Result<PrivateTestResult> {
    let mut rng = seed.stream(lane::NOISE);
    let mut result = complete_test_with_noise(dataset, params, reference, sidedness, &mut rng)?;
    result.seed = Some(seed);
    Ok(result)
}

/// Complete test with the noise uniform drawn from `uniform`.
pub fn complete_test_with_noise<U: UniformSource + ?Sized>(
    dataset: &PairedDataset,
    params: PrivacyParams,
    reference: &ReferenceDistribution,
    sidedness: Sidedness,
    uniform: &mut U,
) -> Result<PrivateTestResult> {
    if reference.n() != dataset.n() || reference.epsilon() != params.epsilon() {
        return Err(Error::param(
            "reference",
            format!("n={}, epsilon={}", reference.n(), reference.epsilon()),
            format!(
                "reference does not match the test (n={}, epsilon={})",
                dataset.n(),
                params.epsilon()
            ),
        ));
    }
    let released = private_pratt_statistic_with(dataset, params, uniform);
    Ok(PrivateTestResult {
        w_tilde: released.w_tilde,
        p: reference.p_value(released.w_tilde, sidedness),
        n: released.n,
        epsilon: released.epsilon,
        c: reference.c(),
        seed: None,
        sidedness,
    })
}
