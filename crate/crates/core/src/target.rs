//! Log-density targets for mode finding, Laplace fitting and skew weights.

use crate::linalg::Matrix;
use crate::scalar::Real;

/// A twice-differentiable (unnormalized) log-density on `R^dim`.
///
/// Implemented by the truncated DPM posterior; tests implement it for toy
/// targets (quadratics, one-dimensional skewed densities).
pub trait LogTarget<T: Real> {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[T]) -> T;

    fn gradient(&self, x: &[T]) -> Vec<T>;

    fn hessian(&self, x: &[T]) -> Matrix<T>;

    /// Value and gradient together; override when they share work.
    fn value_and_gradient(&self, x: &[T]) -> (T, Vec<T>) {
        (self.log_density(x), self.gradient(x))
    }
}

impl<T: Real, L: LogTarget<T> + ?Sized> LogTarget<T> for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, x: &[T]) -> T {
        (**self).log_density(x)
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        (**self).gradient(x)
    }

    fn hessian(&self, x: &[T]) -> Matrix<T> {
        (**self).hessian(x)
    }

    fn value_and_gradient(&self, x: &[T]) -> (T, Vec<T>) {
        (**self).value_and_gradient(x)
    }
}

/// Isotropic quadratic `-0.5 * |x - center|^2 / scale^2`.
#[derive(Debug, Clone)]
pub struct IsotropicGaussianTarget<T> {
    pub center: Vec<T>,
    pub scale: T,
}

impl<T: Real> LogTarget<T> for IsotropicGaussianTarget<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn log_density(&self, x: &[T]) -> T {
        let s2 = self.scale * self.scale;
        -T::lit(0.5)
            * x.iter()
                .zip(&self.center)
                .map(|(&a, &c)| (a - c) * (a - c))
                .sum::<T>()
            / s2
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let s2 = self.scale * self.scale;
        x.iter().zip(&self.center).map(|(&a, &c)| -(a - c) / s2).collect()
    }

    fn hessian(&self, _x: &[T]) -> Matrix<T> {
        let s2 = self.scale * self.scale;
        Matrix::identity(self.dim()).scale(-T::one() / s2)
    }
}
