//! Floating-point scalar abstraction shared by every numerical routine.
//!
//! All model, approximation and sampling code is written against [`Real`], so
//! the same implementation runs in `f64` (the default used by the harness)
//! and `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Open01, StandardNormal, StudentT};

/// A real scalar usable by the crate: `f32` or `f64`.
///
/// Besides the arithmetic from [`Float`], the trait carries the handful of
/// random variate generators the samplers need, so generic code does not have
/// to repeat `rand_distr` bounds at every call site.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on the open interval (0, 1).
    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma draw parametrized by shape and *rate*.
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self;

    fn sample_beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self;

    fn sample_student_t<R: Rng + ?Sized>(dof: Self, rng: &mut R) -> Self;

    /// Replaces every `x` by `exp(x - shift)` and returns their sum.
    fn exp_shifted_sum(xs: &mut [Self], shift: Self) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            #[inline]
            fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            fn sample_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self {
                Gamma::new(shape, 1.0 / rate)
                    .expect("gamma parameters must be positive and finite")
                    .sample(rng)
            }

            fn sample_beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self {
                Beta::new(a, b)
                    .expect("beta parameters must be positive and finite")
                    .sample(rng)
            }

            fn sample_student_t<R: Rng + ?Sized>(dof: Self, rng: &mut R) -> Self {
                StudentT::new(dof)
                    .expect("degrees of freedom must be positive")
                    .sample(rng)
            }

            #[inline]
            fn exp_shifted_sum(xs: &mut [Self], shift: Self) -> Self {
                let mut total = 0.0;
                for x in xs.iter_mut() {
                    *x = (*x - shift).exp();
                    total += *x;
                }
                total
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// `log(1 + exp(x))` without overflow.
#[inline]
pub(crate) fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log N(x | mean, sd^2)`.
#[inline]
pub(crate) fn normal_log_pdf<T: Real>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / sd;
    -T::lit(0.5) * z * z - sd.ln() - T::lit(0.5) * T::TAU().ln()
}
