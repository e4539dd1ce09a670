use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dp-wilcoxon");
const TABLE1: &str = "u,v\n9,18\n2,11\n3,3\n8,10\n9,8\n";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn keys(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                out.push(k.clone());
                keys(x, out);
            }
        }
        Value::Array(xs) => xs.iter().for_each(|x| keys(x, out)),
        _ => {}
    }
}

#[test]
fn test_envelope_has_no_private_fields() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.csv", TABLE1);
    for test in ["new", "tc-hu", "tc-hp", "tc-hu-plus", "tc-hp-plus"] {
        let v = json(&run(&[
            "test",
            "--input",
            &input,
            "--epsilon",
            "1",
            "--c",
            "20000",
            "--test",
            test,
            "--seed",
            "1",
        ]));
        assert_eq!(v["command"], "test");
        assert_eq!(v["params"]["seed"], 1);
        assert!(v["result"]["w_tilde"].is_number());
        let mut all = Vec::new();
        keys(&v, &mut all);
        for forbidden in ["w", "n_r", "pratt_w", "rows", "u", "v"] {
            assert!(
                !all.iter().any(|k| k == forbidden),
                "{test}: key {forbidden}"
            );
        }
    }
}

#[test]
fn missing_seed_is_drawn_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.csv", TABLE1);
    let first = run(&["test", "--input", &input, "--epsilon", "1", "--c", "20000"]);
    let seed = json(&first)["params"]["seed"].as_u64().unwrap();
    let again = run(&[
        "test",
        "--input",
        &input,
        "--epsilon",
        "1",
        "--c",
        "20000",
        "--seed",
        &seed.to_string(),
    ]);
    assert_eq!(first.stdout, again.stdout);
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let args = [
        "tables",
        "--n",
        "10,20,...,40",
        "--alpha",
        "0.05",
        "--c",
        "20000",
        "--seed",
        "2",
        "--format",
        "csv",
    ];
    let stdout = run(&args).stdout;
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    let o = run(&with_out);
    assert!(o.status.success() && o.stdout.is_empty());
    assert_eq!(std::fs::read(&out).unwrap(), stdout);
    let text = String::from_utf8(stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epsilon,n,alpha,critical_value");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("1,40,0.05,"));
}

#[test]
fn power_csv_schema() {
    let o = run(&[
        "power", "--test", "public", "--n", "14", "--trials", "100", "--seed", "4", "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "test,n,epsilon,effect,tie_fraction,alpha,trials,power,stderr"
    );
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("public,14,1,1,0,0.05,100,"));
}

#[test]
fn invalid_inputs_fail_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let nan = write(dir.path(), "nan.csv", "u,v\n1,2\n3,NaN\n");
    let empty = write(dir.path(), "empty.csv", "u,v\n");
    let good = write(dir.path(), "t.csv", TABLE1);
    let missing = dir.path().join("nope.csv");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["test", "--input", &nan, "--epsilon", "1"], "row 2"),
        (
            vec!["test", "--input", &empty, "--epsilon", "1"],
            "empty input",
        ),
        (
            vec![
                "test",
                "--input",
                missing.to_str().unwrap(),
                "--epsilon",
                "1",
            ],
            "nope.csv",
        ),
        (vec!["test", "--input", &good, "--epsilon", "-1"], "epsilon"),
        (
            vec![
                "test",
                "--input",
                &good,
                "--epsilon",
                "1",
                "--test",
                "public",
            ],
            "debug-nonprivate",
        ),
        (
            vec!["test", "--input", &good, "--epsilon", "1", "--alpha", "1.5"],
            "alpha",
        ),
        (
            vec!["test", "--input", &good, "--epsilon", "1", "--u-col", "x"],
            "column",
        ),
        (
            vec![
                "test",
                "--input",
                &good,
                "--epsilon",
                "1",
                "--test",
                "tc-hu",
                "--gamma",
                "0.2",
            ],
            "gamma",
        ),
        (vec!["power", "--n", "10", "--trials", "0"], "trials"),
        (
            vec!["power", "--n", "10", "--epsilon", "public"],
            "privacy budget",
        ),
        (
            vec!["power", "--n", "10", "--c", "300000000", "--trials", "1"],
            "resource",
        ),
        (vec!["tables", "--n", "10,...,40"], "..."),
    ];
    for (args, needle) in cases {
        let o = run(&args);
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(err.contains(needle), "{args:?}: {err}");
        assert!(o.stdout.is_empty(), "{args:?} wrote to stdout");
    }
}

#[test]
fn debug_command_is_labelled_nonprivate() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.csv", TABLE1);
    let o = run(&["debug-nonprivate", "--input", &input]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("NOT differentially private"));
    let v = json(&o);
    assert_eq!(v["result"]["non_private"], true);
    assert_eq!(v["result"]["w"], 8.0);
    assert_eq!(v["result"]["n_r"], 4);
    assert_eq!(v["result"]["pratt_w"], 10.0);
}

#[test]
fn cache_dir_is_populated_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.csv", TABLE1);
    let cache = dir.path().join("cache");
    let args = [
        "test",
        "--input",
        &input,
        "--epsilon",
        "1",
        "--c",
        "30000",
        "--seed",
        "5",
        "--cache-dir",
        cache.to_str().unwrap(),
    ];
    let a = run(&args);
    let bins: Vec<_> = std::fs::read_dir(&cache)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "bin"))
        .collect();
    assert_eq!(bins.len(), 1);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let uncached = run(&args[..args.len() - 2]);
    assert_eq!(a.stdout, uncached.stdout);

    // a damaged entry is regenerated with a warning
    std::fs::write(bins[0].path(), b"broken").unwrap();
    let c = run(&args);
    assert_eq!(a.stdout, c.stdout);
    assert!(String::from_utf8_lossy(&c.stderr).contains("regenerating"));
}

#[test]
fn uniformity_csv_pairs() {
    let o = run(&[
        "uniformity",
        "--n",
        "30",
        "--trials",
        "50",
        "--c",
        "10000",
        "--seed",
        "6",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "p_value,uniform_quantile");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
}
