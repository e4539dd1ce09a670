//! Null p-value calibration of the complete test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::data::{check_tie_fraction, generate_paired_normal};
use crate::inference::{complete_test_with_noise, simulate_reference, Sidedness};
use crate::privacy::PrivacyParams;
use crate::rng::{lane, Seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityConfig {
    pub n: usize,
    pub epsilon: f64,
    pub tie_fraction: f64,
    pub trials: usize,
    pub c: usize,
    pub sidedness: Sidedness,
    pub seed: Seed,
}

/// Sorted null p-values against uniform plotting positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub config: UniformityConfig,
    pub p_values: Vec<f64>,
    /// `(i - 0.5) / m` for `i = 1..=m`.
    pub uniform_quantiles: Vec<f64>,
    /// Kolmogorov-Smirnov distance to the uniform distribution.
    pub max_deviation: f64,
    /// Largest `F(x) - x` of the empirical CDF `F`: excess of small p-values.
    pub max_liberal_deviation: f64,
    /// Largest `x - F(x)`: shortage of small p-values.
    pub max_conservative_deviation: f64,
}

impl UniformityReport {
    /// Builds the report from unsorted p-values.
    pub fn from_p_values(config: UniformityConfig, mut p_values: Vec<f64>) -> Result<Self> {
        if p_values.is_empty() {
            return Err(Error::EmptyInput("no p-values"));
        }
        p_values.sort_by(f64::total_cmp);
        let m = p_values.len() as f64;
        let uniform_quantiles = (1..=p_values.len()).map(|i| (i as f64 - 0.5) / m).collect();
        let mut liberal = 0.0f64;
        let mut conservative = 0.0f64;
        for (i, &p) in p_values.iter().enumerate() {
            let x = p.clamp(0.0, 1.0);
            // ECDF jumps from i/m to (i+1)/m at x
            liberal = liberal.max((i + 1) as f64 / m - x);
            conservative = conservative.max(x - i as f64 / m);
        }
        Ok(UniformityReport {
            config,
            p_values,
            uniform_quantiles,
            max_deviation: liberal.max(conservative),
            max_liberal_deviation: liberal,
            max_conservative_deviation: conservative,
        })
    }

    /// Fraction of p-values below `alpha`.
    pub fn rejection_rate(&self, alpha: f64) -> f64 {
        self.p_values.partition_point(|&p| p < alpha) as f64 / self.p_values.len() as f64
    }
}

/// Runs the complete test on `trials` null datasets (effect 0).
pub fn pvalue_uniformity(config: &UniformityConfig) -> Result<UniformityReport> {
    let params = PrivacyParams::new(config.epsilon)?;
    check_tie_fraction(config.tie_fraction)?;
    if config.trials == 0 {
        return Err(Error::param("trials", config.trials, "must be at least 1"));
    }
    let reference = simulate_reference(config.n, params, config.c, config.seed)?;
    let root = config.seed.child(lane::TRIALS);
    let p_values = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.stream(i as u64);
            let data = generate_paired_normal(config.n, 0.0, config.tie_fraction, &mut rng)?;
            Ok(complete_test_with_noise(&data, params, &reference, config.sidedness, &mut rng)?.p)
        })
        .collect::<Result<Vec<f64>>>()?;
    UniformityReport::from_p_values(*config, p_values)
}
