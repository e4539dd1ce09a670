//! Signed differences, midranks and the two signed-rank statistics.
//!
//! The standard statistic drops zero differences before ranking. The Pratt
//! variant keeps them: they receive sign 0, contribute nothing to the sum, but
//! still occupy the lowest ranks and so push every non-zero row upward.
//!
//! Ties are exact: two magnitudes are tied iff the computed `|v - u|` values
//! compare equal. No tolerance is applied.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired observations `(u, v)`, one per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PairedDataset {
    rows: Vec<(f64, f64)>,
}

impl PairedDataset {
    /// Validates and wraps the rows. Row numbers in errors are 1-based.
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("a paired dataset needs at least one row"));
        }
        for (i, &(u, v)) in rows.iter().enumerate() {
            let row = i + 1;
            if !u.is_finite() {
                return Err(Error::InvalidRow {
                    row,
                    reason: format!("u is not a finite number ({u})"),
                });
            }
            if !v.is_finite() {
                return Err(Error::InvalidRow {
                    row,
                    reason: format!("v is not a finite number ({v})"),
                });
            }
            if !(v - u).is_finite() {
                return Err(Error::InvalidRow {
                    row,
                    reason: "difference v - u overflows".into(),
                });
            }
        }
        Ok(PairedDataset { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<(f64, f64)> {
        self.rows
    }
}

impl TryFrom<Vec<(f64, f64)>> for PairedDataset {
    type Error = Error;

    fn try_from(rows: Vec<(f64, f64)>) -> Result<Self> {
        PairedDataset::new(rows)
    }
}

impl From<PairedDataset> for Vec<(f64, f64)> {
    fn from(d: PairedDataset) -> Self {
        d.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Zero => 0.0,
            Sign::Positive => 1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}

/// Magnitude of a difference. `Unbounded` sits above every finite value and
/// ties only with other `Unbounded` entries; it stands in for the infinite
/// dummy differences of the Task-Clifton high-privacy variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Magnitude {
    Finite(f64),
    Unbounded,
}

impl Magnitude {
    fn cmp_exact(&self, other: &Magnitude) -> Ordering {
        match (self, other) {
            (Magnitude::Finite(a), Magnitude::Finite(b)) => a.total_cmp(b),
            (Magnitude::Finite(_), Magnitude::Unbounded) => Ordering::Less,
            (Magnitude::Unbounded, Magnitude::Finite(_)) => Ordering::Greater,
            (Magnitude::Unbounded, Magnitude::Unbounded) => Ordering::Equal,
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Magnitude::Finite(m) if *m == 0.0)
    }
}

/// `d = |v - u|` and `s = sign(v - u)` for one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedDifference {
    pub magnitude: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedRow {
    /// Position of the row in the input dataset (0-based).
    pub index: usize,
    pub d: f64,
    pub s: Sign,
    pub r: f64,
}

/// Rows sorted by nondecreasing `d` with their midranks.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedTable {
    pub rows: Vec<RankedRow>,
}

impl RankedTable {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn statistic(&self) -> f64 {
        self.rows.iter().map(|row| row.s.as_f64() * row.r).sum()
    }
}

/// How zero differences are treated before ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroHandling {
    /// Standard Wilcoxon: zero differences are removed.
    Drop,
    /// Pratt: zero differences are ranked with sign 0.
    Keep,
}

pub fn compute_signed_differences(dataset: &PairedDataset) -> Vec<SignedDifference> {
    dataset
        .rows()
        .iter()
        .map(|&(u, v)| {
            let diff = v - u;
            SignedDifference {
                magnitude: diff.abs(),
                sign: Sign::of(diff),
            }
        })
        .collect()
}

/// Midranks of `len` items under `cmp`, aligned with the input order.
///
/// Returns the midranks and the sorted order of indices (stable).
fn midranks_by<F>(len: usize, mut cmp: F) -> (Vec<f64>, Vec<usize>)
where
    F: FnMut(usize, usize) -> Ordering,
{
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| cmp(a, b));

    let mut ranks = vec![0.0; len];
    let mut start = 0;
    while start < len {
        let mut end = start + 1;
        while end < len && cmp(order[start], order[end]) == Ordering::Equal {
            end += 1;
        }
        // positions start+1 ..= end, averaged
        let midrank = (start + 1 + end) as f64 / 2.0;
        debug_assert_eq!((midrank * 2.0).fract(), 0.0);
        for &i in &order[start..end] {
            ranks[i] = midrank;
        }
        start = end;
    }
    (ranks, order)
}

/// Assigns 1-based midranks to non-negative magnitudes, aligned with input order.
pub fn assign_midranks(magnitudes: &[f64]) -> Result<Vec<f64>> {
    if magnitudes.is_empty() {
        return Err(Error::EmptyInput("cannot rank an empty list"));
    }
    if let Some(i) = magnitudes.iter().position(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::InvalidRow {
            row: i + 1,
            reason: format!(
                "magnitude must be finite and non-negative, got {}",
                magnitudes[i]
            ),
        });
    }
    Ok(midranks_by(magnitudes.len(), |a, b| {
        magnitudes[a].total_cmp(&magnitudes[b])
    })
    .0)
}

/// Signed-rank sum over arbitrary magnitudes.
///
/// Returns `(w, ranked_count)` where `ranked_count` is the number of entries
/// that took part in the ranking (all of them under [`ZeroHandling::Keep`]).
pub fn signed_rank_sum(entries: &[(Magnitude, Sign)], zeros: ZeroHandling) -> (f64, usize) {
    let kept: Vec<(Magnitude, Sign)> = match zeros {
        ZeroHandling::Keep => entries.to_vec(),
        ZeroHandling::Drop => entries
            .iter()
            .copied()
            .filter(|(m, _)| !m.is_zero())
            .collect(),
    };
    if kept.is_empty() {
        return (0.0, 0);
    }
    let (ranks, _) = midranks_by(kept.len(), |a, b| kept[a].0.cmp_exact(&kept[b].0));
    let w = kept
        .iter()
        .zip(&ranks)
        .map(|((_, s), r)| s.as_f64() * r)
        .sum();
    (w, kept.len())
}

/// Sorted table of `(d, s, r)` rows, with or without the zero rows.
pub fn rank_table(dataset: &PairedDataset, zeros: ZeroHandling) -> RankedTable {
    let diffs: Vec<(usize, SignedDifference)> = compute_signed_differences(dataset)
        .into_iter()
        .enumerate()
        .filter(|(_, sd)| zeros == ZeroHandling::Keep || sd.sign != Sign::Zero)
        .collect();
    let (ranks, order) = midranks_by(diffs.len(), |a, b| {
        diffs[a].1.magnitude.total_cmp(&diffs[b].1.magnitude)
    });
    let rows = order
        .into_iter()
        .map(|k| {
            let (index, sd) = diffs[k];
            RankedRow {
                index,
                d: sd.magnitude,
                s: sd.sign,
                r: ranks[k],
            }
        })
        .collect();
    RankedTable { rows }
}

/// Standard (zero-dropping) Wilcoxon statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonStatistic {
    pub w: f64,
    /// Rows surviving the drop step.
    pub n_r: usize,
}

pub fn wilcoxon_statistic(dataset: &PairedDataset) -> WilcoxonStatistic {
    let (w, n_r) = signed_rank_sum(&finite_entries(dataset), ZeroHandling::Drop);
    WilcoxonStatistic { w, n_r }
}

pub fn pratt_statistic(dataset: &PairedDataset) -> f64 {
    signed_rank_sum(&finite_entries(dataset), ZeroHandling::Keep).0
}

pub fn count_nonzero(dataset: &PairedDataset) -> usize {
    dataset.rows().iter().filter(|(u, v)| u != v).count()
}

pub(crate) fn finite_entries(dataset: &PairedDataset) -> Vec<(Magnitude, Sign)> {
    compute_signed_differences(dataset)
        .into_iter()
        .map(|sd| (Magnitude::Finite(sd.magnitude), sd.sign))
        .collect()
}
