//! Skew-symmetric correction of the Laplace approximation.
//!
//! The corrected density is `2 f_lap(x) w(x)` where
//! `w(x) = p(x) / (p(x) + p(2 m - x))`, `m` the Laplace mode and `p` the
//! unnormalized posterior. The weight only needs log-posterior differences,
//! so the normalizing constant never appears. Exact i.i.d. draws come from
//! proposing `x ~ f_lap` and keeping `x` with probability `w(x)`, reflecting it
//! through the mode otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::laplace::{sample_gaussian_with, LaplaceFit};
use crate::linalg::Matrix;
use crate::model::{DpmPosterior, ModelConfig, UnconstrainedParams};
use crate::scalar::Real;
use crate::target::LogTarget;

/// A Laplace fit together with the log-posterior it approximates.
pub struct SkewWeightContext<'a, T, F> {
    fit: &'a LaplaceFit<T>,
    target: F,
}

impl<'a, T: Real> SkewWeightContext<'a, T, DpmPosterior<'a, T>> {
    pub fn for_dpm(fit: &'a LaplaceFit<T>, cfg: &'a ModelConfig<T>, y: &'a [T]) -> Result<Self> {
        Self::new(fit, DpmPosterior::new(cfg, y)?)
    }
}

impl<'a, T: Real, F: LogTarget<T>> SkewWeightContext<'a, T, F> {
    pub fn new(fit: &'a LaplaceFit<T>, target: F) -> Result<Self> {
        if target.dim() != fit.dim() {
            return Err(Error::DimensionMismatch {
                what: "target vs Laplace fit",
                expected: fit.dim(),
                actual: target.dim(),
            });
        }
        Ok(SkewWeightContext { fit, target })
    }

    pub fn fit(&self) -> &LaplaceFit<T> {
        self.fit
    }

    /// Reflection `2 m - x` through the mode.
    pub fn reflect(&self, x: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        self.fit
            .mode
            .iter()
            .zip(x)
            .map(|(&m, &v)| two * m - v)
            .collect()
    }

    /// `w(x)` on a flat parameter slice.
    pub fn weight(&self, x: &[T]) -> T {
        let diff = self.target.log_density(&self.reflect(x)) - self.target.log_density(x);
        logistic_of_negative(diff)
    }

    pub fn skew_weight(&self, p: &UnconstrainedParams<T>) -> Result<T> {
        if p.dim() != self.fit.dim() {
            return Err(Error::DimensionMismatch {
                what: "parameters vs Laplace fit",
                expected: self.fit.dim(),
                actual: p.dim(),
            });
        }
        Ok(self.weight(p.as_slice()))
    }

    /// Log-density of the skew-corrected approximation, `log 2 + log f_lap + log w`.
    pub fn log_density(&self, x: &[T]) -> T {
        T::LN_2() + self.fit.log_density(x) + self.weight(x).ln()
    }
}

/// `1 / (1 + exp(d))`, clamped to [0, 1].
#[inline]
fn logistic_of_negative<T: Real>(d: T) -> T {
    let w = if d > T::zero() {
        let e = (-d).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + d.exp())
    };
    w.max(T::zero()).min(T::one())
}

/// Output of the reflection sampler.
#[derive(Debug, Clone)]
pub struct SkewDraws<T> {
    /// One draw per row.
    pub draws: Matrix<T>,
    /// Whether row `t` kept its Gaussian proposal (`false`: reflected).
    pub kept: Vec<bool>,
    /// `w` evaluated at each proposal.
    pub weights: Vec<T>,
}

impl<T: Real> SkewDraws<T> {
    pub fn kept_fraction(&self) -> f64 {
        if self.kept.is_empty() {
            return 0.0;
        }
        self.kept.iter().filter(|&&k| k).count() as f64 / self.kept.len() as f64
    }
}

/// `n` i.i.d. draws from the skew-Laplace approximation.
pub fn sample_skew_laplace<T: Real, F: LogTarget<T>>(
    ctx: &SkewWeightContext<'_, T, F>,
    n: usize,
    seed: u64,
) -> SkewDraws<T> {
    sample_skew_laplace_with(ctx, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_skew_laplace_with<T: Real, F: LogTarget<T>, R: Rng + ?Sized>(
    ctx: &SkewWeightContext<'_, T, F>,
    n: usize,
    rng: &mut R,
) -> SkewDraws<T> {
    sample_reflected(ctx.fit, n, rng, |x| ctx.weight(x))
}

/// Reflection sampler with an arbitrary weight function.
///
/// All `n` Gaussian proposals are drawn first, exactly as
/// [`sample_gaussian_with`] would, followed by `n` uniforms for the
/// keep/reflect decisions. With `weight == 1` the output therefore equals the
/// Gaussian stream for the same RNG state.
pub fn sample_reflected<T: Real, R: Rng + ?Sized>(
    fit: &LaplaceFit<T>,
    n: usize,
    rng: &mut R,
    weight: impl Fn(&[T]) -> T,
) -> SkewDraws<T> {
    let mut draws = sample_gaussian_with(fit, n, rng);
    let mut kept = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let two = T::lit(2.0);
    for t in 0..n {
        let row = draws.row_mut(t);
        let w = weight(row);
        let u: T = T::sample_open01(rng);
        let keep = u < w;
        if !keep {
            row.iter_mut()
                .zip(&fit.mode)
                .for_each(|(v, &m)| *v = two * m - *v);
        }
        kept.push(keep);
        weights.push(w);
    }
    SkewDraws {
        draws,
        kept,
        weights,
    }
}
