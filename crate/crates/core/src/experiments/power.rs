//! Power estimation on synthetic and resampled data.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::experiments::data::{check_tie_fraction, generate_paired_normal_correlated, resample};
use crate::inference::{
    check_alpha, complete_test_with_noise, normal_cdf, MemoryReferences, ReferenceSource, Sidedness,
};
use crate::privacy::PrivacyParams;
use crate::ranks::{rank_table, PairedDataset, ZeroHandling};
use crate::rng::{lane, Seed, UniformSource};
use crate::tc::{tc_test, NoiseRows, TcConfig, DEFAULT_GAMMA, DEFAULT_K};

/// Which test a simulation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    /// The complete private test.
    New,
    TcHu,
    TcHp,
    TcHuPlus,
    TcHpPlus,
    /// Non-private Wilcoxon test with the normal approximation.
    Public,
}

impl TestKind {
    pub const ALL: [TestKind; 6] = [
        TestKind::New,
        TestKind::TcHu,
        TestKind::TcHp,
        TestKind::TcHuPlus,
        TestKind::TcHpPlus,
        TestKind::Public,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::New => "new",
            TestKind::TcHu => "tc-hu",
            TestKind::TcHp => "tc-hp",
            TestKind::TcHuPlus => "tc-hu-plus",
            TestKind::TcHpPlus => "tc-hp-plus",
            TestKind::Public => "public",
        }
    }

    /// Two-sided for the complete test and the simulated TC variants,
    /// one-sided for the analytic TC variants and the public test.
    pub fn default_sidedness(self) -> Sidedness {
        match self {
            TestKind::New | TestKind::TcHuPlus | TestKind::TcHpPlus => Sidedness::TwoSided,
            TestKind::TcHu | TestKind::TcHp | TestKind::Public => Sidedness::OneSided,
        }
    }

    pub fn is_private(self) -> bool {
        self != TestKind::Public
    }

    fn uses_reference(self) -> bool {
        matches!(
            self,
            TestKind::New | TestKind::TcHuPlus | TestKind::TcHpPlus
        )
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        TestKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::param(
                    "test",
                    s,
                    "expected new, tc-hu, tc-hp, tc-hu-plus, tc-hp-plus or public",
                )
            })
    }
}

/// Privacy budget, or none for the public test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Public,
    Private(PrivacyParams),
}

impl Epsilon {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(Epsilon::Private(PrivacyParams::new(epsilon)?))
    }

    pub fn params(self) -> Option<PrivacyParams> {
        match self {
            Epsilon::Public => None,
            Epsilon::Private(p) => Some(p),
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epsilon::Public => f.write_str("public"),
            Epsilon::Private(p) => write!(f, "{}", p.epsilon()),
        }
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("public") {
            return Ok(Epsilon::Public);
        }
        let value: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::param("epsilon", s, "expected a positive number or `public`"))?;
        Epsilon::new(value)
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Epsilon::Public => serializer.serialize_str("public"),
            Epsilon::Private(p) => serializer.serialize_f64(p.epsilon()),
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(x) => Epsilon::new(x).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Everything that determines how one dataset is tested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub test: TestKind,
    pub epsilon: Epsilon,
    pub alpha: f64,
    /// Reference draws for the simulated critical values.
    pub c: usize,
    /// `None` picks [`TestKind::default_sidedness`].
    pub sidedness: Option<Sidedness>,
    /// Dummy pairs of the high-privacy TC variants.
    pub k: usize,
    pub gamma: f64,
    pub noise_rows: NoiseRows,
}

impl TestSpec {
    pub fn new(test: TestKind, epsilon: Epsilon) -> Self {
        TestSpec {
            test,
            epsilon,
            alpha: 0.05,
            c: 1_000_000,
            sidedness: None,
            k: DEFAULT_K,
            gamma: DEFAULT_GAMMA,
            noise_rows: NoiseRows::default(),
        }
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
            .unwrap_or_else(|| self.test.default_sidedness())
    }

    pub fn tc_config(&self) -> Option<TcConfig> {
        let base = match self.test {
            TestKind::TcHu | TestKind::TcHuPlus => TcConfig::high_utility(self.alpha),
            TestKind::TcHp | TestKind::TcHpPlus => TcConfig::high_privacy(self.alpha, self.k),
            TestKind::New | TestKind::Public => return None,
        };
        let base = if matches!(self.test, TestKind::TcHuPlus | TestKind::TcHpPlus) {
            base.plus()
        } else {
            base
        };
        Some(TcConfig {
            gamma: self.gamma,
            noise_rows: self.noise_rows,
            ..base.with_sidedness(self.sidedness())
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.test.is_private() && self.epsilon == Epsilon::Public {
            return Err(Error::param(
                "epsilon",
                "public",
                format!("the {} test needs a privacy budget", self.test),
            ));
        }
        if self.test.uses_reference() && self.c == 0 {
            return Err(Error::param(
                "c",
                self.c,
                "need at least one reference draw",
            ));
        }
        if let Some(cfg) = self.tc_config() {
            cfg.validate()?;
        }
        Ok(())
    }

    /// Whether the configured test rejects on `dataset`. Noise comes from `uniform`.
    pub fn rejects<U: UniformSource + ?Sized>(
        &self,
        dataset: &PairedDataset,
        references: &dyn ReferenceSource,
        uniform: &mut U,
    ) -> Result<bool> {
        let sidedness = self.sidedness();
        match (self.test, self.epsilon.params()) {
            (TestKind::Public, _) => Ok(public_wilcoxon_test(dataset, sidedness).p < self.alpha),
            (TestKind::New, Some(params)) => {
                let reference = references.reference(dataset.n(), params)?;
                Ok(
                    complete_test_with_noise(dataset, params, &reference, sidedness, uniform)?
                        .rejects(self.alpha),
                )
            }
            (_, Some(params)) => {
                let cfg = self.tc_config().expect("TC kinds have a TC configuration");
                Ok(tc_test(dataset, params, &cfg, Some(references), uniform)?.reject)
            }
            (_, None) => Err(Error::param(
                "epsilon",
                "public",
                "private tests need a privacy budget",
            )),
        }
    }
}

/// Non-private signed-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublicTestResult {
    pub w: f64,
    pub n_r: usize,
    pub z: f64,
    pub p: f64,
}

/// Standard Wilcoxon test with the normal approximation.
///
/// The null variance is the sum of squared ranks of the non-zero rows, which
/// is `n_r(n_r+1)(2n_r+1)/6` without ties. `p = 1` when every difference is zero.
pub fn public_wilcoxon_test(dataset: &PairedDataset, sidedness: Sidedness) -> PublicTestResult {
    let table = rank_table(dataset, ZeroHandling::Drop);
    let w = table.statistic();
    let n_r = table.n();
    let var: f64 = table.rows.iter().map(|r| r.r * r.r).sum();
    if n_r == 0 {
        return PublicTestResult {
            w,
            n_r,
            z: 0.0,
            p: 1.0,
        };
    }
    let z = w / var.sqrt();
    let p = match sidedness {
        Sidedness::OneSided => normal_cdf(-z),
        Sidedness::TwoSided => (2.0 * normal_cdf(-z.abs())).min(1.0),
    };
    PublicTestResult { w, n_r, z, p }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    #[serde(flatten)]
    pub spec: TestSpec,
    pub n: usize,
    /// Difference of means in units of the common standard deviation.
    pub effect: f64,
    pub tie_fraction: f64,
    /// Within-pair correlation of the untied rows.
    pub correlation: f64,
    pub trials: usize,
    pub seed: Seed,
}

impl PowerConfig {
    /// Effect 1, no ties, 2000 trials, `c = 10^6`, α = 0.05.
    pub fn new(test: TestKind, n: usize, epsilon: Epsilon, seed: Seed) -> Self {
        PowerConfig {
            spec: TestSpec::new(test, epsilon),
            n,
            effect: 1.0,
            tie_fraction: 0.0,
            correlation: 0.0,
            trials: 2000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n == 0 {
            return Err(Error::param("n", self.n, "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", self.trials, "must be at least 1"));
        }
        if !self.effect.is_finite() {
            return Err(Error::param("effect", self.effect, "must be finite"));
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return Err(Error::param(
                "correlation",
                self.correlation,
                "must lie in [-1, 1]",
            ));
        }
        check_tie_fraction(self.tie_fraction)
    }
}

/// Rejection fraction over independent trials, with the config that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate<C = PowerConfig> {
    pub power: f64,
    /// Binomial standard error `sqrt(power (1 - power) / trials)`.
    pub stderr: f64,
    pub rejections: usize,
    pub trials: usize,
    pub config: C,
}

impl<C> PowerEstimate<C> {
    fn from_counts(rejections: usize, trials: usize, config: C) -> Self {
        let power = rejections as f64 / trials as f64;
        PowerEstimate {
            power,
            stderr: (power * (1.0 - power) / trials as f64).sqrt(),
            rejections,
            trials,
            config,
        }
    }
}

/// Counts rejections over `trials` independent trials, run in parallel.
///
/// Trial `i` owns the stream `seed.child(TRIALS).stream(i)` for both its data
/// and its noise, so the count does not depend on scheduling.
fn count_rejections<F>(trials: usize, seed: Seed, trial: F) -> Result<usize>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<bool> + Sync,
{
    let root = seed.child(lane::TRIALS);
    (0..trials)
        .into_par_iter()
        .map(|i| trial(&mut root.stream(i as u64)).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// [`estimate_power_with`] using references seeded by `config.seed`.
pub fn estimate_power(config: &PowerConfig) -> Result<PowerEstimate> {
    let references = MemoryReferences::new(config.spec.c, config.seed);
    estimate_power_with(config, &references)
}

/// Fraction of synthetic datasets on which the configured test rejects.
///
/// One reference distribution per `(n, ε)` is shared by all trials.
pub fn estimate_power_with(
    config: &PowerConfig,
    references: &dyn ReferenceSource,
) -> Result<PowerEstimate> {
    config.validate()?;
    if let (true, Some(params)) = (
        config.spec.test.uses_reference(),
        config.spec.epsilon.params(),
    ) {
        // build (or fail) before fanning out
        let n_ref = match config.spec.tc_config() {
            Some(tc) => tc.assumed_n_r(config.n),
            None => config.n,
        };
        references.reference(n_ref, params)?;
    }
    let rejections = count_rejections(config.trials, config.seed, |rng| {
        let data = generate_paired_normal_correlated(
            config.n,
            config.effect,
            config.tie_fraction,
            config.correlation,
            rng,
        )?;
        config.spec.rejects(&data, references, rng)
    })?;
    Ok(PowerEstimate::from_counts(
        rejections,
        config.trials,
        *config,
    ))
}

/// Axes of a power sweep. Empty axes keep the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n: Vec<usize>,
    pub effect: Vec<f64>,
    pub tie_fraction: Vec<f64>,
    pub epsilon: Vec<Epsilon>,
}

impl SweepGrid {
    /// Cartesian product in `epsilon`, `n`, `effect`, `tie_fraction` order.
    pub fn cells(&self, base: &PowerConfig) -> Vec<PowerConfig> {
        fn or_base<T: Copy>(axis: &[T], base: T) -> Vec<T> {
            if axis.is_empty() {
                vec![base]
            } else {
                axis.to_vec()
            }
        }
        let mut out = Vec::new();
        for &epsilon in &or_base(&self.epsilon, base.spec.epsilon) {
            for &n in &or_base(&self.n, base.n) {
                for &effect in &or_base(&self.effect, base.effect) {
                    for &tie_fraction in &or_base(&self.tie_fraction, base.tie_fraction) {
                        let mut cell = *base;
                        cell.spec.epsilon = epsilon;
                        cell.n = n;
                        cell.effect = effect;
                        cell.tie_fraction = tie_fraction;
                        out.push(cell);
                    }
                }
            }
        }
        out
    }
}

/// One estimate per grid cell.
///
/// Cell `i` runs with seed `base.seed.child(CELLS).child(i)`, which is echoed
/// in its config, so any cell can be rerun on its own.
pub fn power_sweep(grid: &SweepGrid, base: &PowerConfig) -> Result<Vec<PowerEstimate>> {
    let cells = grid.cells(base);
    if cells.len() == 1
        && grid.n.is_empty()
        && grid.effect.is_empty()
        && grid.tie_fraction.is_empty()
        && grid.epsilon.is_empty()
    {
        return Err(Error::EmptyInput("power sweep grid has no axes"));
    }
    let root = base.seed.child(lane::CELLS);
    cells
        .into_iter()
        .enumerate()
        .map(|(i, mut cell)| {
            cell.seed = root.child(i as u64);
            estimate_power(&cell)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    #[serde(flatten)]
    pub spec: TestSpec,
    pub n_sub: usize,
    pub reps: usize,
    pub seed: Seed,
}

/// Rejection fraction over bootstrap subsamples of a fixed dataset.
pub fn subsample_power(
    dataset: &PairedDataset,
    config: &SubsampleConfig,
) -> Result<PowerEstimate<SubsampleConfig>> {
    config.spec.validate()?;
    if config.n_sub == 0 {
        return Err(Error::param("n_sub", config.n_sub, "must be at least 1"));
    }
    if config.reps == 0 {
        return Err(Error::param("reps", config.reps, "must be at least 1"));
    }
    let references = MemoryReferences::new(config.spec.c, config.seed);
    let rejections = count_rejections(config.reps, config.seed, |rng| {
        let sub = resample(dataset, config.n_sub, rng)?;
        config.spec.rejects(&sub, &references, rng)
    })?;
    Ok(PowerEstimate::from_counts(rejections, config.reps, *config))
}
