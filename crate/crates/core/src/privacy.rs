//! Laplace mechanism for the Pratt signed-rank statistic.
//!
//! Changing one row moves the Pratt statistic by at most `2n`, so releasing
//! `w + Lap(2n / ε)` is ε-differentially private. The whole budget goes to
//! this single release; `n` is treated as public.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranks::{pratt_statistic, PairedDataset};
use crate::rng::{lane, Seed, UniformSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    epsilon: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param(
                "epsilon",
                epsilon,
                "must be positive and finite",
            ));
        }
        Ok(PrivacyParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Zero-centred Laplace distribution with scale `b`, density `exp(-|x|/b) / 2b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceNoise {
    scale: f64,
}

impl LaplaceNoise {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::param(
                "scale",
                scale,
                "Laplace scale must be positive and finite",
            ));
        }
        Ok(LaplaceNoise { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Inverse CDF at `u` in (0, 1).
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u < 1.0);
        if u < 0.5 {
            self.scale * (2.0 * u).ln()
        } else {
            -self.scale * (2.0 * (1.0 - u)).ln()
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.5 * (x / self.scale).exp()
        } else {
            1.0 - 0.5 * (-x / self.scale).exp()
        }
    }

    /// One draw, consuming exactly one uniform.
    pub fn sample<U: UniformSource + ?Sized>(&self, uniform: &mut U) -> f64 {
        self.inverse_cdf(uniform.next_open01())
    }

    /// The `g` with `Pr[Λ > g] = gamma`.
    pub fn upper_tail_quantile(&self, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param(
                "gamma",
                gamma,
                "tail probability must lie in (0, 1)",
            ));
        }
        Ok(if gamma <= 0.5 {
            -self.scale * (2.0 * gamma).ln()
        } else {
            self.scale * (2.0 * (1.0 - gamma)).ln()
        })
    }
}

/// Draws one zero-centred Laplace variate.
pub fn laplace_sample<U: UniformSource + ?Sized>(uniform: &mut U, scale: f64) -> Result<f64> {
    Ok(LaplaceNoise::new(scale)?.sample(uniform))
}

pub fn laplace_upper_tail_quantile(scale: f64, gamma: f64) -> Result<f64> {
    LaplaceNoise::new(scale)?.upper_tail_quantile(gamma)
}

/// Global sensitivity bound of the Pratt statistic over `n` rows.
pub fn pratt_sensitivity(n: usize) -> f64 {
    2.0 * n as f64
}

/// Noise calibrated to [`pratt_sensitivity`] for `n` rows.
pub fn pratt_noise(n: usize, params: PrivacyParams) -> LaplaceNoise {
    // n >= 1 and epsilon > 0 make the scale valid
    LaplaceNoise {
        scale: pratt_sensitivity(n.max(1)) / params.epsilon,
    }
}

/// A released noisy statistic and its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivateStatistic {
    pub w_tilde: f64,
    pub n: usize,
    pub epsilon: f64,
    /// `None` when the noise came from a caller-supplied uniform source.
    pub seed: Option<Seed>,
}

/// Releases `pratt_statistic(dataset) + Lap(2n/ε)` using the noise lane of `seed`.
pub fn private_pratt_statistic(
    dataset: &PairedDataset,
    params: PrivacyParams,
    seed: Seed,
) -> PrivateStatistic {
    let mut rng = seed.stream(lane::NOISE);
    PrivateStatistic {
        seed: Some(seed),
        ..private_pratt_statistic_with(dataset, params, &mut rng)
    }
}

/// Same as [`private_pratt_statistic`] but the noise uniform comes from `uniform`.
pub fn private_pratt_statistic_with<U: UniformSource + ?Sized>(
    dataset: &PairedDataset,
    params: PrivacyParams,
    uniform: &mut U,
) -> PrivateStatistic {
    let n = dataset.n();
    let w = pratt_statistic(dataset);
    PrivateStatistic {
        w_tilde: w + pratt_noise(n, params).sample(uniform),
        n,
        epsilon: params.epsilon,
        seed: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::FixedUniform;

    fn table1() -> PairedDataset {
        PairedDataset::new(vec![
            (9.0, 18.0),
            (2.0, 11.0),
            (3.0, 3.0),
            (8.0, 10.0),
            (9.0, 8.0),
        ])
        .unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(PrivacyParams::new(1.0).is_ok());
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(PrivacyParams::new(bad).is_err());
        }
        for bad in [0.0, -2.0, f64::NAN, f64::INFINITY] {
            assert!(LaplaceNoise::new(bad).is_err());
            assert!(laplace_sample(&mut FixedUniform::median(), bad).is_err());
        }
    }

    #[test]
    fn median_uniform_gives_zero() {
        assert_eq!(
            laplace_sample(&mut FixedUniform::median(), 3.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn inverse_cdf_roundtrip() {
        let lap = LaplaceNoise::new(2.5).unwrap();
        for u in [1e-9, 0.01, 0.2, 0.5, 0.7, 0.99, 1.0 - 1e-9] {
            let x = lap.inverse_cdf(u);
            assert!((lap.cdf(x) - u).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn upper_tail_quantile_examples() {
        assert_eq!(laplace_upper_tail_quantile(1.0, 0.5).unwrap(), 0.0);
        assert!((laplace_upper_tail_quantile(2.0, 0.25).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
        let g = laplace_upper_tail_quantile(0.34383, 0.01).unwrap();
        assert!((g - 1.3450).abs() < 5e-4, "{g}");
        // upper half of the distribution is handled by the other branch
        let lap = LaplaceNoise::new(1.5).unwrap();
        for gamma in [0.05, 0.3, 0.6, 0.9] {
            let g = lap.upper_tail_quantile(gamma).unwrap();
            assert!((1.0 - lap.cdf(g) - gamma).abs() < 1e-12);
        }
        for bad in [0.0, 1.0, -0.1, 1.5] {
            assert!(laplace_upper_tail_quantile(1.0, bad).is_err());
        }
    }

    #[test]
    fn sensitivity_constant() {
        assert_eq!(pratt_sensitivity(5), 10.0);
        assert_eq!(pratt_sensitivity(1), 2.0);
        assert_eq!(pratt_sensitivity(100), 200.0);
    }

    #[test]
    fn moments_of_unit_laplace() {
        let mut rng = Seed(2024).rng();
        let lap = LaplaceNoise::new(1.0).unwrap();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| lap.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 2.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn forced_noise_releases_exact_statistic() {
        let p = PrivacyParams::new(1.0).unwrap();
        let s = private_pratt_statistic_with(&table1(), p, &mut FixedUniform::median());
        assert_eq!(s.w_tilde, 10.0);
        assert_eq!((s.n, s.epsilon, s.seed), (5, 1.0, None));

        let same = PairedDataset::new(vec![(1.0, 1.0); 7]).unwrap();
        let s = private_pratt_statistic_with(
            &same,
            PrivacyParams::new(0.3).unwrap(),
            &mut FixedUniform::median(),
        );
        assert_eq!(s.w_tilde, 0.0);
    }

    #[test]
    fn release_is_deterministic_per_seed() {
        let p = PrivacyParams::new(0.5).unwrap();
        let a = private_pratt_statistic(&table1(), p, Seed(99));
        let b = private_pratt_statistic(&table1(), p, Seed(99));
        let c = private_pratt_statistic(&table1(), p, Seed(100));
        assert_eq!(a, b);
        assert_ne!(a.w_tilde, c.w_tilde);
        assert_eq!(a.seed, Some(Seed(99)));
    }

    #[test]
    fn noise_matches_laplace_cdf() {
        // (w~ - w) across independent releases, compared against Lap(2n/eps)
        let x = table1();
        let p = PrivacyParams::new(1.0).unwrap();
        let w = pratt_statistic(&x);
        let mut rng = Seed(5).rng();
        let mut noise: Vec<f64> = (0..1_000_000)
            .map(|_| private_pratt_statistic_with(&x, p, &mut rng).w_tilde - w)
            .collect();
        noise.sort_by(f64::total_cmp);
        let lap = LaplaceNoise::new(10.0).unwrap();
        let m = noise.len() as f64;
        let sup = noise
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let f = lap.cdf(z);
                (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
            })
            .fold(0.0, f64::max);
        assert!(sup < 0.005, "KS distance {sup}");
    }
}
