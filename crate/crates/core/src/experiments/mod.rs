//! Simulation studies: power, null calibration and critical-value tables.

pub mod data;
pub mod power;
pub mod tables;
pub mod uniformity;

pub use data::{generate_paired_normal, generate_paired_normal_correlated, resample, tied_rows};
pub use power::{
    estimate_power, estimate_power_with, power_sweep, public_wilcoxon_test, subsample_power,
    Epsilon, PowerConfig, PowerEstimate, PublicTestResult, SubsampleConfig, SweepGrid, TestKind,
    TestSpec,
};
pub use tables::{critical_value_table, CriticalValueRow, TableConfig};
pub use uniformity::{pvalue_uniformity, UniformityConfig, UniformityReport};
