//! Command-line arguments.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::experiments::{Epsilon, TestKind};
use crate::inference::Sidedness;
use crate::tc::NoiseRows;

#[derive(Debug, Parser)]
#[command(
    name = "dp-wilcoxon",
    version,
    about = "Differentially private Wilcoxon signed-rank tests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a private test on a paired CSV file.
    Test(TestArgs),
    /// Estimate power of one test over a grid of synthetic settings.
    Power(PowerArgs),
    /// Estimate power of several tests over the same grid.
    Compare(CompareArgs),
    /// Null p-value calibration of the complete test.
    Uniformity(UniformityArgs),
    /// Critical-value tables of the complete test.
    Tables(TablesArgs),
    /// NOT PRIVATE: print the exact statistics of a CSV file, for development only.
    DebugNonprivate(DebugArgs),
}

/// Comma-separated list. Integer lists accept `a,b,...,z` for an arithmetic run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr + Clone + ListStep> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out: Vec<T> = Vec::new();
        let tokens: Vec<&str> = s.split(',').map(str::trim).collect();
        let mut i = 0;
        while i < tokens.len() {
            let tok = tokens[i];
            if tok == "..." {
                let last = tokens
                    .get(i + 1)
                    .ok_or("`...` must be followed by an end value")?
                    .parse::<T>()
                    .map_err(|e| e.to_string())?;
                if out.len() < 2 {
                    return Err("`...` needs two values before it".into());
                }
                let run = T::extend(&out[out.len() - 2], &out[out.len() - 1], &last)?;
                out.extend(run);
                i += 2;
                continue;
            }
            if tok.is_empty() {
                return Err("empty list element".into());
            }
            out.push(tok.parse::<T>().map_err(|e| format!("`{tok}`: {e}"))?);
            i += 1;
        }
        if out.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(out))
    }
}

/// Continuation of `a, b, ...` up to and including `end`.
pub trait ListStep: Sized {
    fn extend(a: &Self, b: &Self, end: &Self) -> Result<Vec<Self>, String> {
        let _ = (a, b, end);
        Err("`...` is only supported for integer lists".into())
    }
}

impl ListStep for usize {
    fn extend(a: &usize, b: &usize, end: &usize) -> Result<Vec<usize>, String> {
        if b <= a || end < b || !(end - b).is_multiple_of(b - a) {
            return Err(format!(
                "`{a},{b},...,{end}` is not an increasing arithmetic run"
            ));
        }
        Ok((1..=(end - b) / (b - a)).map(|i| b + i * (b - a)).collect())
    }
}

impl ListStep for f64 {}
impl ListStep for Epsilon {}
impl ListStep for TestKind {}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CsvArgs {
    /// Paired CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "u")]
    pub u_col: String,
    #[arg(long, default_value = "v")]
    pub v_col: String,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

/// Options shared by everything that runs a test.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TestOptions {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Reference draws for simulated critical values and p-values.
    #[arg(long, default_value_t = 1_000_000)]
    pub c: usize,
    /// Defaults: two-sided for new and the plus variants, one-sided otherwise.
    #[arg(long)]
    pub sidedness: Option<Sidedness>,
    /// Dummy pairs of the high-privacy TC variants.
    #[arg(long, default_value_t = 15)]
    pub k: usize,
    /// Laplace tail budget of the analytic TC critical value.
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    /// Rows calibrating the noise of the high-privacy TC variants.
    #[arg(long, value_enum, default_value_t = NoiseRowsArg::Augmented)]
    pub tc_noise_rows: NoiseRowsArg,
    /// Root seed; drawn from system entropy when absent.
    #[arg(long)]
    #[serde(skip)]
    pub seed: Option<u64>,
    /// Directory for cached reference distributions.
    #[arg(long)]
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseRowsArg {
    Augmented,
    Original,
}

impl From<NoiseRowsArg> for NoiseRows {
    fn from(a: NoiseRowsArg) -> Self {
        match a {
            NoiseRowsArg::Augmented => NoiseRows::Augmented,
            NoiseRowsArg::Original => NoiseRows::Original,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub csv: CsvArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value = "new")]
    pub test: TestKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: TestOptions,
}

/// Grid axes of the synthetic power experiments.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value = "32")]
    pub n: List<usize>,
    /// Privacy budgets, or `public`.
    #[arg(long, default_value = "1")]
    pub epsilon: List<Epsilon>,
    /// Difference of means in standard deviations.
    #[arg(long, default_value = "1")]
    pub effect: List<f64>,
    #[arg(long, default_value = "0")]
    pub tie_fraction: List<f64>,
    /// Within-pair correlation of untied rows.
    #[arg(long, default_value_t = 0.0)]
    pub correlation: f64,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerArgs {
    #[arg(long, default_value = "new")]
    pub test: TestKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: TestOptions,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, default_value = "new,tc-hu,tc-hp,tc-hu-plus,tc-hp-plus,public")]
    pub tests: List<TestKind>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: TestOptions,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UniformityArgs {
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tie_fraction: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub c: usize,
    #[arg(long, default_value_t = Sidedness::TwoSided)]
    pub sidedness: Sidedness,
    #[arg(long)]
    #[serde(skip)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TablesArgs {
    #[arg(long, default_value = "1")]
    pub epsilon: List<f64>,
    #[arg(long, default_value = "10,20,...,100")]
    pub n: List<usize>,
    #[arg(long, default_value = "0.05,0.025,0.01,0.005")]
    pub alpha: List<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub c: usize,
    #[arg(long, default_value_t = Sidedness::TwoSided)]
    pub sidedness: Sidedness,
    /// Divide critical values by the null standard deviation.
    #[arg(long)]
    pub normalized: bool,
    #[arg(long)]
    #[serde(skip)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DebugArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub csv: CsvArgs,
}
