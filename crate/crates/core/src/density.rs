//! Mixture-density ordinates of posterior draws on a shared grid.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{stick_transform, StickWeights};
use crate::scalar::Real;

/// Equally spaced evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub points: Vec<T>,
    pub dx: T,
}

impl<T: Real> Grid<T> {
    pub fn new(lo: T, hi: T, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidConfig(format!("grid needs at least 2 points, got {n_points}")));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput(format!("degenerate grid range [{lo}, {hi}]")));
        }
        let dx = (hi - lo) / T::from_usize(n_points - 1).unwrap();
        let points = (0..n_points)
            .map(|i| lo + dx * T::from_usize(i).unwrap())
            .collect();
        Ok(Grid { points, dx })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Riemann sum `sum f(x_r) dx`.
    pub fn integrate(&self, f: &[T]) -> T {
        f.iter().copied().sum::<T>() * self.dx
    }
}

/// Grid over `[min y - pad, max y + pad]` with `pad = pad_sd * kernel_sd`.
/// `pad_sd = 0` gives the data range itself.
pub fn make_grid<T: Real>(y: &[T], n_points: usize, pad_sd: T, kernel_sd: T) -> Result<Grid<T>> {
    let lo = y.iter().copied().reduce(T::min);
    let hi = y.iter().copied().reduce(T::max);
    match (lo, hi) {
        (Some(lo), Some(hi)) if hi > lo => {
            let pad = pad_sd * kernel_sd;
            Grid::new(lo - pad, hi + pad, n_points)
        }
        _ => Err(Error::InvalidInput(
            "grid needs data with distinct minimum and maximum".into(),
        )),
    }
}

/// Normal kernel density `N(x | mean, sd^2)`.
#[inline]
pub fn normal_pdf<T: Real>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / sd;
    (-T::lit(0.5) * z * z).exp() / (sd * T::TAU().sqrt())
}

/// `f(x_r) = sum_h pi_h N(x_r | theta_h, sigma^2)` written into `out`.
pub fn mixture_ordinates_into<T: Real>(pi: &[T], theta: &[T], sigma: T, grid: &Grid<T>, out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::zero());
    for (&p, &t) in pi.iter().zip(theta) {
        if p <= T::zero() {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(&grid.points) {
            *o = *o + p * normal_pdf(x, t, sigma);
        }
    }
}

/// Ordinates of a flat unconstrained draw `(R_1..R_{K-1}, theta_1..theta_K)`.
pub fn ordinates<T: Real>(draw: &[T], sigma: T, grid: &Grid<T>) -> Result<Vec<T>> {
    if draw.len() % 2 == 0 {
        return Err(Error::DimensionMismatch {
            what: "unconstrained draw (must be 2K - 1)",
            expected: draw.len() + 1,
            actual: draw.len(),
        });
    }
    let k = draw.len().div_ceil(2);
    let sticks = stick_transform(&draw[..k - 1]);
    let mut out = vec![T::zero(); grid.len()];
    mixture_ordinates_into(&sticks.pi, &draw[k - 1..], sigma, grid, &mut out);
    Ok(out)
}

/// Ordinates of a draw given as stick fractions (`K - 1`) and atoms (`K`).
pub fn ordinates_from_sticks<T: Real>(v: &[T], theta: &[T], sigma: T, grid: &Grid<T>) -> Result<Vec<T>> {
    if v.len() + 1 != theta.len() {
        return Err(Error::DimensionMismatch {
            what: "atoms for given sticks",
            expected: v.len() + 1,
            actual: theta.len(),
        });
    }
    let pi = StickWeights::from_fractions(v).pi;
    let mut out = vec![T::zero(); grid.len()];
    mixture_ordinates_into(&pi, theta, sigma, grid, &mut out);
    Ok(out)
}

/// Draws x grid matrix of density ordinates for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEnsemble<T> {
    pub grid: Grid<T>,
    pub ords: Matrix<T>,
    pub method: String,
}

impl<T: Real> DensityEnsemble<T> {
    /// From unconstrained draws stored one per row.
    pub fn from_unconstrained(
        draws: &Matrix<T>,
        sigma: T,
        grid: &Grid<T>,
        method: impl Into<String>,
    ) -> Result<Self> {
        let mut ords = Matrix::zeros(draws.nrows(), grid.len());
        for (t, row) in draws.rows().enumerate() {
            ords.row_mut(t).copy_from_slice(&ordinates(row, sigma, grid)?);
        }
        Ok(DensityEnsemble {
            grid: grid.clone(),
            ords,
            method: method.into(),
        })
    }

    /// From `(sticks, atoms)` pairs.
    pub fn from_sticks<'a, I>(draws: I, sigma: T, grid: &Grid<T>, method: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [T], &'a [T])>,
    {
        let mut data = Vec::new();
        let mut rows = 0;
        for (v, theta) in draws {
            data.extend(ordinates_from_sticks(v, theta, sigma, grid)?);
            rows += 1;
        }
        Ok(DensityEnsemble {
            grid: grid.clone(),
            ords: Matrix::from_row_major(rows, grid.len(), data),
            method: method.into(),
        })
    }

    pub fn n_draws(&self) -> usize {
        self.ords.nrows()
    }

    /// Writes the grid as the first row, then one row per draw.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut line = |vals: &[T]| -> std::io::Result<()> {
            let s: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", s.join(","))
        };
        line(&self.grid.points).map_err(|e| Error::io(path, e))?;
        for row in self.ords.rows() {
            line(row).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Columnwise mean of the ordinates.
pub fn posterior_mean_density<T: Real>(ens: &DensityEnsemble<T>) -> Result<Vec<T>> {
    let n = ens.n_draws();
    if n == 0 {
        return Err(Error::InvalidInput(format!("ensemble '{}' has no draws", ens.method)));
    }
    let mut mean = vec![T::zero(); ens.grid.len()];
    for row in ens.ords.rows() {
        mean.iter_mut().zip(row).for_each(|(m, &v)| *m = *m + v);
    }
    let inv = T::one() / T::from_usize(n).unwrap();
    mean.iter_mut().for_each(|m| *m = *m * inv);
    Ok(mean)
}
