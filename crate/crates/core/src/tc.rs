//! Task-Clifton private signed-rank tests, with the Laplace tail corrected.
//!
//! Both variants release the standard (zero-dropping) statistic plus
//! `Lap(2 * rows / ε)`. Because the number of non-zero rows `n_r` is private,
//! they compare against a critical value built for an assumed lower bound on
//! `n_r`:
//!
//! * high utility assumes `n_r >= ceil(0.3 n)`; this is not differentially
//!   private in general, only under a restricted universe of databases;
//! * high privacy appends `k` rows of difference `+inf` and `k` of `-inf`,
//!   which guarantees `n_r >= 2k` and cancels out of the statistic.
//!
//! Critical values are tabulated on the standardized scale (statistic divided
//! by `null_sigma`) and keyed by row count, with the noise of that row count
//! folded in. Standardized Laplace noise `2m / (ε σ(m))` shrinks as `m`
//! grows, so reading the table at the assumed lower bound is conservative.
//! The released statistic is standardized by `null_sigma(rows)`, which is
//! also an upper bound on its true null spread.
//!
//! The analytic table uses the union bound
//! `Pr[W + Λ > b + g] <= β + γ - βγ` with `β = (α - γ) / (1 - γ)`; the "+"
//! variants replace it with the simulated quantile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{check_alpha, normal_quantile, null_sigma, ReferenceSource, Sidedness};
use crate::privacy::{LaplaceNoise, PrivacyParams};
use crate::ranks::{finite_entries, signed_rank_sum, Magnitude, PairedDataset, Sign, ZeroHandling};
use crate::rng::UniformSource;

pub const DEFAULT_GAMMA: f64 = 0.01;
pub const DEFAULT_K: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcVariant {
    HighUtility,
    HighPrivacy { k: usize },
}

/// Row count used to calibrate the noise of the high-privacy variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRows {
    /// Real rows plus the `2k` dummies.
    #[default]
    Augmented,
    /// Real rows only.
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcConfig {
    pub variant: TcVariant,
    /// Laplace tail budget of the analytic bound.
    pub gamma: f64,
    pub alpha: f64,
    /// Use the simulated quantile (the "+" variants).
    pub use_simulated_cv: bool,
    pub sidedness: Sidedness,
    pub noise_rows: NoiseRows,
}

impl TcConfig {
    pub fn high_utility(alpha: f64) -> Self {
        TcConfig {
            variant: TcVariant::HighUtility,
            gamma: DEFAULT_GAMMA,
            alpha,
            use_simulated_cv: false,
            sidedness: Sidedness::OneSided,
            noise_rows: NoiseRows::Augmented,
        }
    }

    pub fn high_privacy(alpha: f64, k: usize) -> Self {
        TcConfig {
            variant: TcVariant::HighPrivacy { k },
            ..TcConfig::high_utility(alpha)
        }
    }

    /// Switches to simulated critical values, two-sided like the complete test.
    pub fn plus(self) -> Self {
        TcConfig {
            use_simulated_cv: true,
            sidedness: Sidedness::TwoSided,
            ..self
        }
    }

    pub fn with_sidedness(self, sidedness: Sidedness) -> Self {
        TcConfig { sidedness, ..self }
    }

    /// Tail probability handed to the critical-value computation.
    fn tail_alpha(&self) -> f64 {
        match self.sidedness {
            Sidedness::OneSided => self.alpha,
            Sidedness::TwoSided => self.alpha / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if let TcVariant::HighPrivacy { k } = self.variant {
            if k == 0 {
                return Err(Error::param("k", k, "need at least one dummy pair"));
            }
        }
        if !self.use_simulated_cv {
            if !(self.gamma > 0.0 && self.gamma < 1.0) {
                return Err(Error::param("gamma", self.gamma, "must lie in (0, 1)"));
            }
            if self.gamma >= self.tail_alpha() {
                return Err(Error::param(
                    "gamma",
                    self.gamma,
                    format!("must be below the tail level {}", self.tail_alpha()),
                ));
            }
        }
        Ok(())
    }

    /// Lower bound on `n_r` the critical value is built for.
    pub fn assumed_n_r(&self, n: usize) -> usize {
        match self.variant {
            TcVariant::HighUtility => (3 * n).div_ceil(10).max(1),
            TcVariant::HighPrivacy { k } => 2 * k,
        }
    }

    /// Rows entering the ranking.
    pub fn ranked_rows(&self, n: usize) -> usize {
        match self.variant {
            TcVariant::HighUtility => n,
            TcVariant::HighPrivacy { k } => n + 2 * k,
        }
    }

    fn noise_row_count(&self, n: usize) -> usize {
        match (self.variant, self.noise_rows) {
            (TcVariant::HighPrivacy { .. }, NoiseRows::Original) => n,
            _ => self.ranked_rows(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcResult {
    pub w_tilde: f64,
    /// Rejection threshold on the scale of `w_tilde`.
    pub critical_value: f64,
    /// The same threshold divided by `null_sigma(ranked_rows)`.
    pub critical_value_normalized: f64,
    pub reject: bool,
    pub assumed_n_r: usize,
    pub ranked_rows: usize,
    pub sidedness: Sidedness,
    /// False for the high-utility variant.
    pub differentially_private: bool,
}

/// Union-bound critical value `b + g`.
///
/// `b` is the `1 - β` normal quantile at `null_sigma(n_assumed)` and `g` the
/// upper `γ` tail of `Lap(2n/ε)`. With `normalized`, the result is divided by
/// `null_sigma(n_assumed)`.
pub fn tc_analytic_critical_value(
    n: usize,
    n_assumed: usize,
    epsilon: f64,
    alpha: f64,
    gamma: f64,
    normalized: bool,
) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 || n_assumed == 0 || n_assumed > n {
        return Err(Error::param(
            "n_assumed",
            n_assumed,
            format!("must lie in 1..={n}"),
        ));
    }
    if !(gamma > 0.0 && gamma < alpha) {
        return Err(Error::param(
            "gamma",
            gamma,
            format!("must lie in (0, alpha = {alpha})"),
        ));
    }
    let params = PrivacyParams::new(epsilon)?;
    let beta = (alpha - gamma) / (1.0 - gamma);
    let sigma = null_sigma(n_assumed);
    let b = sigma * normal_quantile(1.0 - beta)?;
    let g = LaplaceNoise::new(2.0 * n as f64 / params.epsilon())?.upper_tail_quantile(gamma)?;
    let cv = b + g;
    Ok(if normalized { cv / sigma } else { cv })
}

/// Zero-dropping statistic of the dataset with `k` dummy pairs at `+inf` and
/// `k` at `-inf`. Returns `(w, ranked_count)`.
pub fn augmented_statistic(dataset: &PairedDataset, k: usize) -> (f64, usize) {
    let mut entries = finite_entries(dataset);
    entries.extend(std::iter::repeat_n(
        (Magnitude::Unbounded, Sign::Positive),
        k,
    ));
    entries.extend(std::iter::repeat_n(
        (Magnitude::Unbounded, Sign::Negative),
        k,
    ));
    signed_rank_sum(&entries, ZeroHandling::Drop)
}

/// Standardized critical value read at the assumed `n_r`.
fn normalized_table_value(
    config: &TcConfig,
    n_assumed: usize,
    params: PrivacyParams,
    references: Option<&dyn ReferenceSource>,
) -> Result<f64> {
    if config.use_simulated_cv {
        let refs = references.ok_or_else(|| {
            Error::param(
                "references",
                "none",
                "simulated critical values need a reference source",
            )
        })?;
        let reference = refs.reference(n_assumed, params)?;
        Ok(reference
            .critical_value(config.alpha, config.sidedness, true)?
            .value)
    } else {
        tc_analytic_critical_value(
            n_assumed,
            n_assumed,
            params.epsilon(),
            config.tail_alpha(),
            config.gamma,
            true,
        )
    }
}

fn run_tc<U: UniformSource + ?Sized>(
    dataset: &PairedDataset,
    params: PrivacyParams,
    config: &TcConfig,
    references: Option<&dyn ReferenceSource>,
    uniform: &mut U,
) -> Result<TcResult> {
    config.validate()?;
    let n = dataset.n();
    let (w, _) = match config.variant {
        TcVariant::HighUtility => augmented_statistic(dataset, 0),
        TcVariant::HighPrivacy { k } => augmented_statistic(dataset, k),
    };
    let noise = LaplaceNoise::new(2.0 * config.noise_row_count(n) as f64 / params.epsilon())?;
    let w_tilde = w + noise.sample(uniform);

    let ranked_rows = config.ranked_rows(n);
    let assumed_n_r = config.assumed_n_r(n);
    let normalized = normalized_table_value(config, assumed_n_r, params, references)?;
    let critical_value = normalized * null_sigma(ranked_rows);
    let reject = match config.sidedness {
        Sidedness::OneSided => w_tilde > critical_value,
        Sidedness::TwoSided => w_tilde.abs() > critical_value,
    };
    Ok(TcResult {
        w_tilde,
        critical_value,
        critical_value_normalized: normalized,
        reject,
        assumed_n_r,
        ranked_rows,
        sidedness: config.sidedness,
        differentially_private: matches!(config.variant, TcVariant::HighPrivacy { .. })
            && config.noise_rows == NoiseRows::Augmented,
    })
}

fn expect_variant(config: &TcConfig, high_privacy: bool) -> Result<()> {
    let is_hp = matches!(config.variant, TcVariant::HighPrivacy { .. });
    if is_hp != high_privacy {
        return Err(Error::param(
            "variant",
            format!("{:?}", config.variant),
            "configuration does not match the requested test",
        ));
    }
    if config.use_simulated_cv {
        return Err(Error::param(
            "use_simulated_cv",
            true,
            "use tc_plus_test for simulated critical values",
        ));
    }
    Ok(())
}

/// High-utility test with the analytic critical value at `n_r = ceil(0.3 n)`.
pub fn tc_high_utility_test<U: UniformSource + ?Sized>(
    dataset: &PairedDataset,
    params: PrivacyParams,
    config: &TcConfig,
    uniform: &mut U,
) -> Result<TcResult> {
    expect_variant(config, false)?;
    run_tc(dataset, params, config, None, uniform)
}

/// High-privacy test with `k` dummy pairs and the analytic critical value at `n_r = 2k`.
pub fn tc_high_privacy_test<U: UniformSource + ?Sized>(
    dataset: &PairedDataset,
    params: PrivacyParams,
    config: &TcConfig,
    uniform: &mut U,
) -> Result<TcResult> {
    expect_variant(config, true)?;
    run_tc(dataset, params, config, None, uniform)
}

/// Either variant with the simulated critical value at the assumed `n_r`.
pub fn tc_plus_test<U: UniformSource + ?Sized>(
    dataset: &PairedDataset,
    params: PrivacyParams,
    config: &TcConfig,
    references: &dyn ReferenceSource,
    uniform: &mut U,
) -> Result<TcResult> {
    if !config.use_simulated_cv {
        return Err(Error::param(
            "use_simulated_cv",
            false,
            "tc_plus_test needs simulated critical values",
        ));
    }
    run_tc(dataset, params, config, Some(references), uniform)
}

/// Dispatches on `config.use_simulated_cv`.
pub fn tc_test<U: UniformSource + ?Sized>(
    dataset: &PairedDataset,
    params: PrivacyParams,
    config: &TcConfig,
    references: Option<&dyn ReferenceSource>,
    uniform: &mut U,
) -> Result<TcResult> {
    run_tc(dataset, params, config, references, uniform)
}
