//! Differentially private Wilcoxon signed-rank testing.
//!
//! The Pratt variant of the signed-rank statistic keeps zero differences in
//! the ranking, which bounds its sensitivity by `2n` regardless of ties. The
//! complete test releases that statistic with Laplace noise and scores it
//! against a simulated null distribution of the noisy statistic.
//!
//! ```
//! use dp_wilcoxon::{complete_test, PairedDataset, PrivacyParams, Seed, Sidedness};
//!
//! let data = PairedDataset::new(vec![(9.0, 18.0), (2.0, 11.0), (3.0, 3.0), (8.0, 10.0), (9.0, 8.0)])?;
//! let eps = PrivacyParams::new(1.0)?;
//! let result = complete_test(&data, eps, 10_000, Seed(7), Sidedness::TwoSided)?;
//! assert!(result.p > 0.0 && result.p <= 1.0);
//! # Ok::<(), dp_wilcoxon::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod io;
pub mod privacy;
pub mod ranks;
pub mod rng;
pub mod tc;

pub use error::{Error, Result};
pub use inference::{
    complete_test, complete_test_against, complete_test_with_noise, critical_value, normal_cdf,
    normal_quantile, null_sigma, p_value, simulate_reference, CriticalValue, MemoryReferences,
    PrivateTestResult, ReferenceDistribution, ReferenceSource, Sidedness,
};
pub use privacy::{
    laplace_sample, laplace_upper_tail_quantile, pratt_sensitivity, private_pratt_statistic,
    LaplaceNoise, PrivacyParams, PrivateStatistic,
};
pub use ranks::{
    assign_midranks, compute_signed_differences, pratt_statistic, rank_table, wilcoxon_statistic,
    Magnitude, PairedDataset, RankedTable, Sign, WilcoxonStatistic, ZeroHandling,
};
pub use rng::{FixedUniform, Seed, UniformSource};
pub use tc::{tc_analytic_critical_value, TcConfig, TcResult, TcVariant};
