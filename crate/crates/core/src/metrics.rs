//! Total-variation discrepancies between density estimates.

use serde::{Deserialize, Serialize};

use crate::density::{posterior_mean_density, DensityEnsemble};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of histogram bins used by [`pointwise_empirical_tv`].
pub const EMPIRICAL_TV_BINS: usize = 50;

/// `0.5 * sum |f - g| dx`.
pub fn grid_tv<T: Real>(f: &[T], g: &[T], dx: T) -> Result<T> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch {
            what: "density vectors",
            expected: f.len(),
            actual: g.len(),
        });
    }
    if !(dx > T::zero()) {
        return Err(Error::InvalidInput(format!("grid spacing must be positive, got {dx}")));
    }
    Ok(T::lit(0.5) * f.iter().zip(g).map(|(&a, &b)| (a - b).abs()).sum::<T>() * dx)
}

/// Histogram TV between two samples, bins spanning the pooled range.
pub fn empirical_tv<T: Real>(a: &[T], b: &[T], bins: usize) -> f64 {
    let lo = a.iter().chain(b).copied().fold(T::infinity(), T::min).to_f64_lossy();
    let hi = a.iter().chain(b).copied().fold(T::neg_infinity(), T::max).to_f64_lossy();
    if !(hi > lo) {
        return 0.0;
    }
    let width = (hi - lo) / bins as f64;
    let hist = |s: &[T]| {
        let mut h = vec![0usize; bins];
        for &v in s {
            h[(((v.to_f64_lossy() - lo) / width) as usize).min(bins - 1)] += 1;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    0.5 * ha
        .iter()
        .zip(&hb)
        .map(|(&p, &q)| (p as f64 / na - q as f64 / nb).abs())
        .sum::<f64>()
}

/// Per grid point, histogram TV between the two ensembles' ordinate samples.
pub fn pointwise_empirical_tv<T: Real>(a: &DensityEnsemble<T>, b: &DensityEnsemble<T>) -> Result<Vec<f64>> {
    check_same_grid(a, b)?;
    if a.n_draws() == 0 || b.n_draws() == 0 {
        return Err(Error::InvalidInput("pointwise TV needs non-empty ensembles".into()));
    }
    Ok((0..a.grid.len())
        .map(|r| empirical_tv(&a.ords.column(r), &b.ords.column(r), EMPIRICAL_TV_BINS))
        .collect())
}

fn check_same_grid<T: Real>(a: &DensityEnsemble<T>, b: &DensityEnsemble<T>) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::InvalidInput(format!(
            "ensembles '{}' and '{}' use different grids",
            a.method, b.method
        )));
    }
    Ok(())
}

/// TV summaries of one approximation against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TVReport {
    pub tv_to_truth: Option<f64>,
    pub tv_to_slice_mean: f64,
    pub pointwise_tv: Vec<f64>,
    /// `100 (1 - tv_skew / tv_lap)`; filled on the skew report only.
    pub improvement_pct: Option<f64>,
}

/// Laplace and skew reports, plus the reference chain's distance to truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPair {
    pub laplace: TVReport,
    pub skew: TVReport,
    pub slice_tv_to_truth: Option<f64>,
}

/// `100 (1 - skew / lap)`, omitted when `lap` is numerically zero.
pub fn improvement_pct(tv_lap: f64, tv_skew: f64) -> Option<f64> {
    (tv_lap >= 1e-12).then(|| 100.0 * (1.0 - tv_skew / tv_lap))
}

pub fn assemble_report<T: Real>(
    truth: Option<&[T]>,
    lap: &DensityEnsemble<T>,
    skew: &DensityEnsemble<T>,
    slice: &DensityEnsemble<T>,
) -> Result<ReportPair> {
    check_same_grid(lap, slice)?;
    check_same_grid(skew, slice)?;
    let dx = slice.grid.dx;
    let slice_mean = posterior_mean_density(slice)?;
    let to_truth = |m: &[T]| -> Result<Option<f64>> {
        truth
            .map(|t| grid_tv(m, t, dx).map(T::to_f64_lossy))
            .transpose()
    };
    let one = |ens: &DensityEnsemble<T>| -> Result<TVReport> {
        let mean = posterior_mean_density(ens)?;
        Ok(TVReport {
            tv_to_truth: to_truth(&mean)?,
            tv_to_slice_mean: grid_tv(&mean, &slice_mean, dx)?.to_f64_lossy(),
            pointwise_tv: pointwise_empirical_tv(ens, slice)?,
            improvement_pct: None,
        })
    };
    let laplace = one(lap)?;
    let mut skew = one(skew)?;
    skew.improvement_pct = improvement_pct(laplace.tv_to_slice_mean, skew.tv_to_slice_mean);
    Ok(ReportPair {
        laplace,
        skew,
        slice_tv_to_truth: to_truth(&slice_mean)?,
    })
}
