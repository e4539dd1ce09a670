//! The `dp-wilcoxon` command line.
//!
//! Every command produces a [`ResultEnvelope`]: the command name, the crate
//! version, the fully resolved parameters (including the seed) and the
//! result. JSON output is the envelope itself; CSV output is the result table
//! only. Private commands never write row data, the number of non-zero rows
//! or the noiseless statistic.

pub mod args;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{
    critical_value_table, power_sweep, pvalue_uniformity, Epsilon, PowerConfig, PowerEstimate,
    SweepGrid, TableConfig, TestKind, TestSpec, UniformityConfig,
};
use crate::inference::{
    complete_test_against, MemoryReferences, PrivateTestResult, ReferenceSource,
};
use crate::io::{read_paired_csv, CachedReferences, CsvOptions};
use crate::privacy::PrivacyParams;
use crate::ranks::{pratt_statistic, wilcoxon_statistic, PairedDataset};
use crate::rng::{lane, Seed};
use crate::tc::{tc_test, TcResult, TcVariant};

pub use args::{Cli, Command, Format};
use args::{
    CompareArgs, CsvArgs, DebugArgs, GridArgs, PowerArgs, TablesArgs, TestArgs, TestOptions,
    UniformityArgs,
};

#[derive(Debug, Clone, Serialize)]
pub struct ResultEnvelope<P, R> {
    pub command: &'static str,
    pub version: &'static str,
    pub params: P,
    pub result: R,
}

/// Runs one parsed invocation and returns the text to emit.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Test(a) => run_test(a, cli.format),
        Command::Power(a) => run_power(a, cli.format),
        Command::Compare(a) => run_compare(a, cli.format),
        Command::Uniformity(a) => run_uniformity(a, cli.format),
        Command::Tables(a) => run_tables(a, cli.format),
        Command::DebugNonprivate(a) => run_debug(a, cli.format),
    }
}

/// Writes `text` to `out`, or stdout when absent.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn envelope<P: Serialize, R: Serialize>(
    command: &'static str,
    params: P,
    result: R,
) -> Result<String> {
    let env = ResultEnvelope {
        command,
        version: env!("CARGO_PKG_VERSION"),
        params,
        result,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    Ok(text)
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn resolve_seed(seed: Option<u64>) -> Seed {
    seed.map(Seed).unwrap_or_else(Seed::from_entropy)
}

fn read_csv(a: &CsvArgs) -> Result<PairedDataset> {
    if !a.delimiter.is_ascii() {
        return Err(Error::param(
            "delimiter",
            a.delimiter,
            "must be a single ASCII character",
        ));
    }
    let options = CsvOptions {
        u_column: a.u_col.clone(),
        v_column: a.v_col.clone(),
        delimiter: a.delimiter as u8,
    };
    read_paired_csv(&a.input, &options)
}

fn test_spec(test: TestKind, epsilon: Epsilon, o: &TestOptions) -> TestSpec {
    TestSpec {
        alpha: o.alpha,
        c: o.c,
        sidedness: o.sidedness,
        k: o.k,
        gamma: o.gamma,
        noise_rows: o.tc_noise_rows.into(),
        ..TestSpec::new(test, epsilon)
    }
}

fn references(o: &TestOptions, seed: Seed) -> Result<Box<dyn ReferenceSource>> {
    Ok(match &o.cache_dir {
        Some(dir) => Box::new(CachedReferences::new(dir, o.c, seed)?),
        None => Box::new(MemoryReferences::new(o.c, seed)),
    })
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum TestOutcome {
    Complete {
        #[serde(flatten)]
        result: PrivateTestResult,
        reject: bool,
    },
    Tc(TcResult),
}

fn run_test(a: &TestArgs, format: Format) -> Result<String> {
    if a.test == TestKind::Public {
        return Err(Error::param(
            "test",
            "public",
            "the public test is not private; use `debug-nonprivate` during development",
        ));
    }
    let params = PrivacyParams::new(a.epsilon)?;
    let spec = test_spec(a.test, Epsilon::Private(params), &a.options);
    spec.validate()?;
    let data = read_csv(&a.csv)?;
    let seed = resolve_seed(a.options.seed);
    let refs = references(&a.options, seed)?;

    let outcome = match spec.tc_config() {
        None => {
            let reference = refs.reference(data.n(), params)?;
            let result = complete_test_against(&data, params, &reference, seed, spec.sidedness())?;
            TestOutcome::Complete {
                reject: result.rejects(spec.alpha),
                result,
            }
        }
        Some(cfg) => {
            if cfg.variant == TcVariant::HighUtility {
                log::warn!("the high-utility TC test is not differentially private in general");
            }
            let mut rng = seed.stream(lane::NOISE);
            TestOutcome::Tc(tc_test(&data, params, &cfg, Some(refs.as_ref()), &mut rng)?)
        }
    };
    drop(data);

    match format {
        Format::Json => envelope("test", SeededParams { args: a, seed }, outcome),
        Format::Csv => {
            let (w_tilde, p, cv, reject) = match &outcome {
                TestOutcome::Complete { result, reject } => {
                    (result.w_tilde, result.p.to_string(), String::new(), *reject)
                }
                TestOutcome::Tc(r) => (
                    r.w_tilde,
                    String::new(),
                    r.critical_value.to_string(),
                    r.reject,
                ),
            };
            csv_text(
                &[
                    "test",
                    "epsilon",
                    "alpha",
                    "sidedness",
                    "w_tilde",
                    "p",
                    "critical_value",
                    "reject",
                ],
                [vec![
                    a.test.to_string(),
                    a.epsilon.to_string(),
                    spec.alpha.to_string(),
                    spec.sidedness().to_string(),
                    w_tilde.to_string(),
                    p,
                    cv,
                    reject.to_string(),
                ]],
            )
        }
    }
}

fn grid(g: &GridArgs) -> SweepGrid {
    SweepGrid {
        n: g.n.0.clone(),
        effect: g.effect.0.clone(),
        tie_fraction: g.tie_fraction.0.clone(),
        epsilon: g.epsilon.0.clone(),
    }
}

fn sweep_one(
    test: TestKind,
    g: &GridArgs,
    o: &TestOptions,
    seed: Seed,
) -> Result<Vec<PowerEstimate>> {
    let base = PowerConfig {
        spec: test_spec(test, g.epsilon.0[0], o),
        n: g.n.0[0],
        effect: g.effect.0[0],
        tie_fraction: g.tie_fraction.0[0],
        correlation: g.correlation,
        trials: g.trials,
        seed,
    };
    let sweep = grid(g);
    // validate every cell before running any
    for cell in sweep.cells(&base) {
        cell.validate()?;
    }
    if o.cache_dir.is_some() {
        log::info!("power simulations keep references in memory; --cache-dir is ignored");
    }
    power_sweep(&sweep, &base)
}

fn power_rows(estimates: &[PowerEstimate]) -> Result<String> {
    csv_text(
        &[
            "test",
            "n",
            "epsilon",
            "effect",
            "tie_fraction",
            "alpha",
            "trials",
            "power",
            "stderr",
        ],
        estimates.iter().map(|e| {
            let c = &e.config;
            vec![
                c.spec.test.to_string(),
                c.n.to_string(),
                c.spec.epsilon.to_string(),
                c.effect.to_string(),
                c.tie_fraction.to_string(),
                c.spec.alpha.to_string(),
                e.trials.to_string(),
                e.power.to_string(),
                e.stderr.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Serialize)]
struct SeededParams<'a, A> {
    #[serde(flatten)]
    args: &'a A,
    seed: Seed,
}

fn run_power(a: &PowerArgs, format: Format) -> Result<String> {
    let seed = resolve_seed(a.options.seed);
    let estimates = sweep_one(a.test, &a.grid, &a.options, seed)?;
    match format {
        Format::Json => envelope("power", SeededParams { args: a, seed }, estimates),
        Format::Csv => power_rows(&estimates),
    }
}

fn run_compare(a: &CompareArgs, format: Format) -> Result<String> {
    let seed = resolve_seed(a.options.seed);
    let mut estimates = Vec::new();
    for (i, &test) in a.tests.0.iter().enumerate() {
        estimates.extend(sweep_one(test, &a.grid, &a.options, seed.child(i as u64))?);
    }
    match format {
        Format::Json => envelope("compare", SeededParams { args: a, seed }, estimates),
        Format::Csv => power_rows(&estimates),
    }
}

fn run_uniformity(a: &UniformityArgs, format: Format) -> Result<String> {
    let seed = resolve_seed(a.seed);
    let config = UniformityConfig {
        n: a.n,
        epsilon: a.epsilon,
        tie_fraction: a.tie_fraction,
        trials: a.trials,
        c: a.c,
        sidedness: a.sidedness,
        seed,
    };
    let report = pvalue_uniformity(&config)?;
    match format {
        Format::Json => envelope("uniformity", SeededParams { args: a, seed }, report),
        Format::Csv => csv_text(
            &["p_value", "uniform_quantile"],
            report
                .p_values
                .iter()
                .zip(&report.uniform_quantiles)
                .map(|(p, q)| vec![p.to_string(), q.to_string()]),
        ),
    }
}

fn run_tables(a: &TablesArgs, format: Format) -> Result<String> {
    let seed = resolve_seed(a.seed);
    let config = TableConfig {
        epsilons: a.epsilon.0.clone(),
        ns: a.n.0.clone(),
        alphas: a.alpha.0.clone(),
        c: a.c,
        sidedness: a.sidedness,
        normalized: a.normalized,
        seed,
    };
    let rows = critical_value_table(&config)?;
    match format {
        Format::Json => envelope("tables", SeededParams { args: a, seed }, rows),
        Format::Csv => csv_text(
            &["epsilon", "n", "alpha", "critical_value"],
            rows.iter().map(|r| {
                vec![
                    r.epsilon.to_string(),
                    r.n.to_string(),
                    r.alpha.to_string(),
                    r.critical_value.to_string(),
                ]
            }),
        ),
    }
}

#[derive(Debug, Serialize)]
struct DebugStatistics {
    non_private: bool,
    n: usize,
    w: f64,
    n_r: usize,
    pratt_w: f64,
}

fn run_debug(a: &DebugArgs, format: Format) -> Result<String> {
    eprintln!("warning: debug-nonprivate prints exact statistics; its output is NOT differentially private");
    let data = read_csv(&a.csv)?;
    let std = wilcoxon_statistic(&data);
    let stats = DebugStatistics {
        non_private: true,
        n: data.n(),
        w: std.w,
        n_r: std.n_r,
        pratt_w: pratt_statistic(&data),
    };
    match format {
        Format::Json => envelope("debug-nonprivate", a, stats),
        Format::Csv => csv_text(
            &["n", "w", "n_r", "pratt_w"],
            [vec![
                stats.n.to_string(),
                stats.w.to_string(),
                stats.n_r.to_string(),
                stats.pratt_w.to_string(),
            ]],
        ),
    }
}
