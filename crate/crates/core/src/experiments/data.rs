//! Synthetic paired data.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ranks::PairedDataset;

/// Number of tied rows, `floor(tie_fraction * n)`.
///
/// A tolerance far below one row absorbs representation error, e.g. `0.29 * 100`.
pub fn tied_rows(n: usize, tie_fraction: f64) -> usize {
    ((tie_fraction * n as f64 + 1e-9).floor() as usize).min(n)
}

pub(crate) fn check_tie_fraction(tie_fraction: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tie_fraction) {
        Ok(())
    } else {
        Err(Error::param(
            "tie_fraction",
            tie_fraction,
            "must lie in [0, 1]",
        ))
    }
}

/// `n` pairs with `u ~ N(0, 1)` and `v ~ N(effect, 1)`.
///
/// The first `floor(tie_fraction * n)` rows are exact ties `v = u`. The other
/// rows are drawn independently.
pub fn generate_paired_normal<R: Rng + ?Sized>(
    n: usize,
    effect: f64,
    tie_fraction: f64,
    rng: &mut R,
) -> Result<PairedDataset> {
    generate_paired_normal_correlated(n, effect, tie_fraction, 0.0, rng)
}

/// Like [`generate_paired_normal`] with within-pair correlation `rho` on the untied rows.
pub fn generate_paired_normal_correlated<R: Rng + ?Sized>(
    n: usize,
    effect: f64,
    tie_fraction: f64,
    rho: f64,
    rng: &mut R,
) -> Result<PairedDataset> {
    if n == 0 {
        return Err(Error::param("n", n, "must be at least 1"));
    }
    if !effect.is_finite() {
        return Err(Error::param("effect", effect, "must be finite"));
    }
    check_tie_fraction(tie_fraction)?;
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::param("correlation", rho, "must lie in [-1, 1]"));
    }
    let ties = tied_rows(n, tie_fraction);
    let spread = (1.0 - rho * rho).sqrt();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.sample(StandardNormal);
        if i < ties {
            rows.push((u, u));
        } else if rho == 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            rows.push((u, effect + z));
        } else {
            let z: f64 = rng.sample(StandardNormal);
            rows.push((u, effect + rho * u + spread * z));
        }
    }
    PairedDataset::new(rows)
}

/// Bootstrap resample of `size` rows drawn with replacement.
pub fn resample<R: Rng + ?Sized>(
    dataset: &PairedDataset,
    size: usize,
    rng: &mut R,
) -> Result<PairedDataset> {
    let rows = dataset.rows();
    let picked = (0..size)
        .map(|_| rows[rng.random_range(0..rows.len())])
        .collect();
    PairedDataset::new(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranks::count_nonzero;
    use crate::rng::Seed;

    #[test]
    fn tie_counts() {
        assert_eq!(tied_rows(10, 0.3), 3);
        assert_eq!(tied_rows(100, 0.29), 29);
        assert_eq!(tied_rows(7, 0.5), 3);
        assert_eq!(tied_rows(7, 1.0), 7);
        assert_eq!(tied_rows(7, 0.0), 0);
    }

    #[test]
    fn full_ties_give_all_zero_differences() {
        let x = generate_paired_normal(50, 1.0, 1.0, &mut Seed(1).rng()).unwrap();
        assert_eq!(count_nonzero(&x), 0);
        let x = generate_paired_normal(50, 1.0, 0.3, &mut Seed(1).rng()).unwrap();
        assert_eq!(count_nonzero(&x), 35);
        assert!(x.rows()[..15].iter().all(|(u, v)| u == v));
    }

    #[test]
    fn mean_difference_matches_effect() {
        let n = 100_000;
        let x = generate_paired_normal(n, 1.0, 0.0, &mut Seed(2).rng()).unwrap();
        let mean = x.rows().iter().map(|(u, v)| v - u).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.015, "{mean}");
    }

    #[test]
    fn correlation_knob() {
        let n = 100_000;
        let x = generate_paired_normal_correlated(n, 0.0, 0.0, 0.8, &mut Seed(3).rng()).unwrap();
        let r = x.rows();
        let cov = r.iter().map(|(u, v)| u * v).sum::<f64>() / n as f64;
        let var_v = r.iter().map(|(_, v)| v * v).sum::<f64>() / n as f64;
        assert!((cov - 0.8).abs() < 0.02, "{cov}");
        assert!((var_v - 1.0).abs() < 0.02, "{var_v}");
    }

    #[test]
    fn invalid_inputs() {
        let mut rng = Seed(4).rng();
        assert!(generate_paired_normal(0, 1.0, 0.0, &mut rng).is_err());
        assert!(generate_paired_normal(5, f64::NAN, 0.0, &mut rng).is_err());
        assert!(generate_paired_normal(5, 1.0, 1.5, &mut rng).is_err());
        assert!(generate_paired_normal_correlated(5, 1.0, 0.0, 2.0, &mut rng).is_err());
    }

    #[test]
    fn resample_draws_existing_rows() {
        let x = PairedDataset::new(vec![(1.0, 2.0), (3.0, 5.0)]).unwrap();
        let y = resample(&x, 20, &mut Seed(5).rng()).unwrap();
        assert_eq!(y.n(), 20);
        assert!(y.rows().iter().all(|r| x.rows().contains(r)));
    }
}
