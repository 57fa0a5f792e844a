//! Gaussian (Laplace) approximation of the truncated DPM posterior.
//!
//! The approximation is centred at the posterior mode with covariance
//! `(-H)^{-1}`, `H` the Hessian of the log-posterior at the mode. When `-H`
//! is numerically indefinite, a diagonal jitter `lambda I` is added on the
//! schedule `1e-8, 1e-7, ..., 1e-2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{DpmPosterior, ModelConfig, UnconstrainedParams};
use crate::optim::{maximize, OptimOptions};
use crate::scalar::Real;
use crate::target::LogTarget;

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;

/// Options for mode finding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeOptions {
    /// Gradient sup-norm tolerance.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Number of additional jittered restarts (0 = single start).
    pub restarts: usize,
    /// Standard deviation of the location jitter used for restarts.
    pub restart_jitter: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions {
            grad_tol: 1e-6,
            max_iters: 10_000,
            restarts: 0,
            restart_jitter: 0.5,
        }
    }
}

impl ModeOptions {
    fn optim(&self) -> OptimOptions {
        OptimOptions {
            grad_tol: self.grad_tol,
            max_iters: self.max_iters,
            ..OptimOptions::default()
        }
    }
}

/// Located posterior mode.
#[derive(Debug, Clone)]
pub struct ModeSearch<T> {
    pub mode: UnconstrainedParams<T>,
    pub log_posterior: T,
    pub grad_norm: T,
    pub iterations: usize,
}

/// Gaussian approximation `N(mode, cov)` to the posterior.
#[derive(Debug, Clone)]
pub struct LaplaceFit<T> {
    pub mode: Vec<T>,
    pub cov: Matrix<T>,
    /// Lower-triangular factor with `chol * chol^T = cov`.
    pub chol: Matrix<T>,
    /// Diagonal jitter added to `-H` before inversion (0 when none was needed).
    pub jitter: T,
    pub opt_iters: usize,
    pub grad_norm_at_mode: T,
    /// `log det(cov)`, cached for density evaluation.
    log_det_cov: T,
    /// Lower factor of the precision `-H + jitter I`.
    precision_chol: Matrix<T>,
}

impl<T: Real> LaplaceFit<T> {
    pub fn dim(&self) -> usize {
        self.mode.len()
    }

    /// Truncation level implied by the dimension `2K - 1`.
    pub fn truncation(&self) -> usize {
        (self.dim() + 1) / 2
    }

    pub fn mode_params(&self) -> Result<UnconstrainedParams<T>> {
        UnconstrainedParams::new(self.truncation(), self.mode.clone())
    }

    /// The (unjittered) precision `-H + jitter I` the covariance inverts.
    pub fn precision(&self) -> Matrix<T> {
        self.precision_chol.matmul(&self.precision_chol.transpose())
    }

    /// Log-density of the Gaussian approximation at `x`.
    pub fn log_density(&self, x: &[T]) -> T {
        let diff: Vec<T> = x.iter().zip(&self.mode).map(|(&a, &m)| a - m).collect();
        // Mahalanobis via the precision factor: |L^T diff|^2.
        let l = &self.precision_chol;
        let n = self.dim();
        let mut quad = T::zero();
        for j in 0..n {
            let mut s = T::zero();
            for i in j..n {
                s = s + l[(i, j)] * diff[i];
            }
            quad = quad + s * s;
        }
        -T::lit(0.5) * (quad + self.log_det_cov + T::from_usize(n).unwrap() * T::TAU().ln())
    }

    /// Draws `mode + chol z` with `z` standard normal into `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [T], out: &mut [T]) {
        let n = self.dim();
        for zi in z.iter_mut() {
            *zi = T::sample_standard_normal(rng);
        }
        for i in 0..n {
            let mut s = self.mode[i];
            for j in 0..=i {
                s = s + self.chol[(i, j)] * z[j];
            }
            out[i] = s;
        }
    }
}

/// Starting point: locations at the empirical quantiles `(h - 0.5) / K` of the
/// data, sticks at their prior mean `1 / (1 + alpha)` (logit `log(1 / alpha)`).
pub fn initial_params<T: Real>(cfg: &ModelConfig<T>, y: &[T]) -> Result<UnconstrainedParams<T>> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::InvalidInput("at least one observation is required".into()));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
    let k = cfg.k;
    let logits = vec![(T::one() / cfg.alpha).ln(); k - 1];
    let locations: Vec<T> = (0..k)
        .map(|h| {
            let level = (T::from_usize(h).unwrap() + T::lit(0.5)) / T::from_usize(k).unwrap();
            quantile_sorted(&sorted, level)
        })
        .collect();
    UnconstrainedParams::from_parts(&logits, &locations)
}

/// Linear-interpolation quantile (type 7) of sorted data.
fn quantile_sorted<T: Real>(sorted: &[T], level: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = level * T::from_usize(n - 1).unwrap();
    let lo = pos.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = pos - T::from_usize(lo).unwrap();
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Maximizes the log-posterior from `init`.
pub fn find_mode<T: Real>(
    cfg: &ModelConfig<T>,
    y: &[T],
    init: &UnconstrainedParams<T>,
    opts: &ModeOptions,
) -> Result<ModeSearch<T>> {
    init.check_against(cfg)?;
    let target = DpmPosterior::new(cfg, y)?;
    find_mode_of(&target, init.as_slice(), opts).and_then(|(x, value, grad_norm, iterations)| {
        Ok(ModeSearch {
            mode: UnconstrainedParams::new(cfg.k, x)?,
            log_posterior: value,
            grad_norm,
            iterations,
        })
    })
}

/// Mode search on an arbitrary target; returns `(x, value, grad_norm, iterations)`.
pub fn find_mode_of<T: Real, F: LogTarget<T>>(
    target: &F,
    init: &[T],
    opts: &ModeOptions,
) -> Result<(Vec<T>, T, T, usize)> {
    if init.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial point",
            expected: target.dim(),
            actual: init.len(),
        });
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial point must be finite".into()));
    }
    let out = maximize(target, init, &opts.optim());
    let grad_norm = out.grad_norm();
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            grad_norm: grad_norm.to_f64_lossy(),
            best: out.x.iter().map(|v| v.to_f64_lossy()).collect(),
        });
    }
    Ok((out.x, out.value, grad_norm, out.iterations))
}

/// Mode search with optional jittered restarts; keeps the highest mode.
///
/// Restart `s` perturbs the initial locations by independent
/// `N(0, restart_jitter^2)` noise drawn from `rng`.
pub fn find_mode_multistart<T: Real, R: Rng + ?Sized>(
    cfg: &ModelConfig<T>,
    y: &[T],
    opts: &ModeOptions,
    rng: &mut R,
) -> Result<ModeSearch<T>> {
    let init = initial_params(cfg, y)?;
    let mut best = find_mode(cfg, y, &init, opts);
    let jitter = T::lit(opts.restart_jitter);
    for _ in 0..opts.restarts {
        let mut x = init.as_slice().to_vec();
        for v in x[cfg.k - 1..].iter_mut() {
            *v = *v + jitter * T::sample_standard_normal(rng);
        }
        let start = UnconstrainedParams::new(cfg.k, x)?;
        let cand = find_mode(cfg, y, &start, opts);
        best = match (best, cand) {
            (Ok(b), Ok(c)) => Ok(if c.log_posterior > b.log_posterior { c } else { b }),
            (Err(_), Ok(c)) => Ok(c),
            (b, Err(_)) => b,
        };
    }
    best
}

/// Builds the Gaussian approximation at `mode` from the exact Hessian.
pub fn gaussian_from_hessian<T: Real>(
    cfg: &ModelConfig<T>,
    mode: &ModeSearch<T>,
    y: &[T],
) -> Result<LaplaceFit<T>> {
    mode.mode.check_against(cfg)?;
    let target = DpmPosterior::new(cfg, y)?;
    let mut fit = gaussian_from_target(&target, mode.mode.as_slice())?;
    fit.opt_iters = mode.iterations;
    fit.grad_norm_at_mode = mode.grad_norm;
    Ok(fit)
}

/// Gaussian approximation of any target at a given point.
pub fn gaussian_from_target<T: Real, F: LogTarget<T>>(target: &F, mode: &[T]) -> Result<LaplaceFit<T>> {
    let d = target.dim();
    if mode.len() != d {
        return Err(Error::DimensionMismatch {
            what: "mode",
            expected: d,
            actual: mode.len(),
        });
    }
    let neg_h = target.hessian(mode).symmetrized().scale(-T::one());
    let mut jitter = T::zero();
    let precision_chol = loop {
        let mut trial = neg_h.clone();
        trial.add_diagonal(jitter);
        if let Some(l) = trial.cholesky() {
            break l;
        }
        jitter = if jitter == T::zero() {
            T::lit(JITTER_START)
        } else {
            jitter * T::lit(10.0)
        };
        if jitter > T::lit(JITTER_MAX) * T::lit(1.000_001) {
            return Err(Error::NotPositiveDefinite {
                max_jitter: JITTER_MAX,
            });
        }
    };
    let cov = precision_chol.cholesky_inverse();
    let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite {
        max_jitter: jitter.to_f64_lossy(),
    })?;
    let log_det_cov = -T::lit(2.0)
        * (0..d)
            .map(|i| precision_chol[(i, i)].ln())
            .sum::<T>();
    let grad_norm_at_mode = crate::optim::sup_norm(&target.gradient(mode));
    Ok(LaplaceFit {
        mode: mode.to_vec(),
        cov,
        chol,
        jitter,
        opt_iters: 0,
        grad_norm_at_mode,
        log_det_cov,
        precision_chol,
    })
}

/// Initialization, mode search (with restarts) and Gaussian construction.
pub fn fit_laplace<T: Real, R: Rng + ?Sized>(
    cfg: &ModelConfig<T>,
    y: &[T],
    opts: &ModeOptions,
    rng: &mut R,
) -> Result<LaplaceFit<T>> {
    let mode = find_mode_multistart(cfg, y, opts, rng)?;
    gaussian_from_hessian(cfg, &mode, y)
}

/// `n` i.i.d. draws from the Gaussian approximation, one per row.
pub fn sample_gaussian<T: Real>(fit: &LaplaceFit<T>, n: usize, seed: u64) -> Matrix<T> {
    sample_gaussian_with(fit, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_gaussian_with<T: Real, R: Rng + ?Sized>(fit: &LaplaceFit<T>, n: usize, rng: &mut R) -> Matrix<T> {
    let d = fit.dim();
    let mut out = Matrix::zeros(n, d);
    let mut z = vec![T::zero(); d];
    for t in 0..n {
        fit.draw_into(rng, &mut z, out.row_mut(t));
    }
    out
}
