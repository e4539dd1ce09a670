//! Critical-value tables of the complete test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{check_alpha, simulate_reference, Sidedness};
use crate::privacy::PrivacyParams;
use crate::rng::{lane, Seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueRow {
    pub epsilon: f64,
    pub n: usize,
    pub alpha: f64,
    pub critical_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub c: usize,
    pub sidedness: Sidedness,
    pub normalized: bool,
    pub seed: Seed,
}

/// One row per `(ε, n, α)`, in that nesting order.
///
/// Each `(ε, n)` cell draws its own reference from
/// `seed.child(CELLS).child(cell)` and is dropped before the next one.
pub fn critical_value_table(config: &TableConfig) -> Result<Vec<CriticalValueRow>> {
    if config.epsilons.is_empty() || config.ns.is_empty() || config.alphas.is_empty() {
        return Err(Error::EmptyInput(
            "critical value table needs epsilons, ns and alphas",
        ));
    }
    let params = config
        .epsilons
        .iter()
        .map(|&e| PrivacyParams::new(e))
        .collect::<Result<Vec<_>>>()?;
    for &a in &config.alphas {
        check_alpha(a)?;
    }
    if let Some(&n) = config.ns.iter().find(|&&n| n == 0) {
        return Err(Error::param("n", n, "must be at least 1"));
    }

    let root = config.seed.child(lane::CELLS);
    let mut rows = Vec::with_capacity(params.len() * config.ns.len() * config.alphas.len());
    let mut cell = 0u64;
    for &p in &params {
        for &n in &config.ns {
            let reference = simulate_reference(n, p, config.c, root.child(cell))?;
            cell += 1;
            for &alpha in &config.alphas {
                let cv = reference.critical_value(alpha, config.sidedness, config.normalized)?;
                rows.push(CriticalValueRow {
                    epsilon: p.epsilon(),
                    n,
                    alpha,
                    critical_value: cv.value,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TableConfig {
        TableConfig {
            epsilons: vec![1.0, 0.1],
            ns: vec![10, 50],
            alphas: vec![0.05, 0.01],
            c: 20_000,
            sidedness: Sidedness::TwoSided,
            normalized: false,
            seed: Seed(3),
        }
    }

    #[test]
    fn shape_and_order() {
        let rows = critical_value_table(&cfg()).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!((rows[0].epsilon, rows[0].n, rows[0].alpha), (1.0, 10, 0.05));
        assert_eq!((rows[7].epsilon, rows[7].n, rows[7].alpha), (0.1, 50, 0.01));
        // smaller alpha, larger threshold
        for pair in rows.chunks(2) {
            assert!(pair[1].critical_value > pair[0].critical_value);
        }
        assert_eq!(rows, critical_value_table(&cfg()).unwrap());
    }

    #[test]
    fn small_table_near_published_cell() {
        let mut c = cfg();
        c.epsilons = vec![1.0];
        c.ns = vec![10];
        c.alphas = vec![0.05];
        c.c = 400_000;
        let v = critical_value_table(&c).unwrap()[0].critical_value;
        assert!((v - 70.0).abs() <= 2.0, "{v}");
    }

    #[test]
    fn rejects_bad_grids() {
        for mutate in [
            (|c: &mut TableConfig| c.ns.clear()) as fn(&mut TableConfig),
            |c| c.alphas = vec![1.5],
            |c| c.epsilons = vec![0.0],
            |c| c.ns = vec![0],
        ] {
            let mut c = cfg();
            mutate(&mut c);
            assert!(critical_value_table(&c).is_err());
        }
    }
}
