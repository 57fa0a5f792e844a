//! Monotone ascent for smooth log-densities.
//!
//! Limited-memory BFGS with a strong-Wolfe line search does the bulk of the
//! work; when it stalls short of the gradient tolerance, a damped Newton phase
//! using the exact Hessian finishes the job. Every accepted step increases the
//! objective, except in the Newton phase where a step whose change is below
//! the objective's rounding resolution is accepted if it shrinks the gradient.

use std::collections::VecDeque;

use crate::scalar::Real;
use crate::target::LogTarget;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    /// Convergence threshold on the gradient sup-norm.
    pub grad_tol: f64,
    /// Iteration budget shared by both phases.
    pub max_iters: usize,
    /// Number of correction pairs kept by L-BFGS.
    pub memory: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            grad_tol: 1e-6,
            max_iters: 10_000,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> OptimOutcome<T> {
    pub fn grad_norm(&self) -> T {
        sup_norm(&self.grad)
    }
}

pub(crate) fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn axpy<T: Real>(x: &[T], step: T, d: &[T]) -> Vec<T> {
    x.iter().zip(d).map(|(&a, &b)| a + step * b).collect()
}

/// Maximizes `target` starting from `x0`.
///
/// Always returns the best point found; `converged` tells whether the
/// gradient tolerance was met.
pub fn maximize<T: Real, F: LogTarget<T>>(target: &F, x0: &[T], opts: &OptimOptions) -> OptimOutcome<T> {
    let tol = T::lit(opts.grad_tol);
    // Internally minimize f = -target.
    let eval = |x: &[T]| {
        let (v, g) = target.value_and_gradient(x);
        (-v, g.into_iter().map(|g| -g).collect::<Vec<T>>())
    };

    let mut x = x0.to_vec();
    let (mut f, mut g) = eval(&x);
    let mut iters = 0usize;
    let done = |g: &[T]| sup_norm(g) <= tol;

    if !done(&g) {
        let mut hist: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(opts.memory);
        while iters < opts.max_iters {
            iters += 1;
            let mut d = two_loop(&g, &hist);
            let mut slope = dot(&g, &d);
            if !(slope < T::zero()) || !slope.is_finite() {
                hist.clear();
                d = g.iter().map(|&v| -v).collect();
                slope = dot(&g, &d);
            }
            let init_step = if hist.is_empty() {
                (T::one() / sup_norm(&g)).min(T::one())
            } else {
                T::one()
            };
            let step = match wolfe_search(&eval, &x, f, slope, &d, init_step) {
                Some(s) => s,
                None if !hist.is_empty() => {
                    hist.clear();
                    continue;
                }
                None => break,
            };
            let s: Vec<T> = x.iter().zip(&step.x).map(|(&a, &b)| b - a).collect();
            let yv: Vec<T> = g.iter().zip(&step.g).map(|(&a, &b)| b - a).collect();
            let sy = dot(&s, &yv);
            if sy > T::epsilon() * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
                if hist.len() == opts.memory {
                    hist.pop_front();
                }
                hist.push_back((s, yv, T::one() / sy));
            }
            x = step.x;
            f = step.f;
            g = step.g;
            if done(&g) {
                break;
            }
        }

        if !done(&g) {
            newton_polish(target, &eval, &mut x, &mut f, &mut g, tol, &mut iters, opts.max_iters);
        }
    }

    let converged = done(&g);
    OptimOutcome {
        x,
        value: -f,
        grad: g.into_iter().map(|v| -v).collect(),
        iterations: iters,
        converged,
    }
}

fn two_loop<T: Real>(g: &[T], hist: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q: Vec<T> = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = *rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, &yi)| *qi = *qi - a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v = *v * gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, &si)| *qi = *qi + (a - b) * si);
    }
    q.into_iter().map(|v| -v).collect()
}

struct Step<T> {
    x: Vec<T>,
    f: T,
    g: Vec<T>,
}

/// Strong-Wolfe line search (bracketing then zoom) on `f(x + a d)`.
fn wolfe_search<T: Real>(
    eval: &impl Fn(&[T]) -> (T, Vec<T>),
    x: &[T],
    f0: T,
    slope0: T,
    d: &[T],
    init: T,
) -> Option<Step<T>> {
    let c1 = T::lit(1e-4);
    let c2 = T::lit(0.9);
    let max_evals = 60;
    let try_at = |a: T| {
        let xn = axpy(x, a, d);
        let (f, g) = eval(&xn);
        let slope = dot(&g, d);
        (xn, f, g, slope)
    };

    let mut a_prev = T::zero();
    let mut f_prev = f0;
    let mut slope_prev = slope0;
    let mut a = init;
    let mut evals = 0;
    // Bracketing phase.
    let (mut lo, mut hi);
    loop {
        evals += 1;
        let (xn, fa, ga, sa) = try_at(a);
        if !fa.is_finite() {
            // Step left the region where the target is finite: shrink.
            a = (a_prev + a) * T::lit(0.5);
            if evals >= max_evals {
                return None;
            }
            continue;
        }
        if fa > f0 + c1 * a * slope0 || (evals > 1 && fa >= f_prev) {
            lo = (a_prev, f_prev, slope_prev);
            hi = (a, fa, sa);
            break;
        }
        if sa.abs() <= -c2 * slope0 {
            return Some(Step { x: xn, f: fa, g: ga });
        }
        if sa >= T::zero() {
            lo = (a, fa, sa);
            hi = (a_prev, f_prev, slope_prev);
            break;
        }
        if evals >= max_evals {
            // Sufficient decrease holds here even if curvature never did.
            return Some(Step { x: xn, f: fa, g: ga });
        }
        a_prev = a;
        f_prev = fa;
        slope_prev = sa;
        a = a * T::lit(2.0);
    }

    // Zoom phase. `lo` always satisfies sufficient decrease.
    let mut best: Option<Step<T>> = None;
    while evals < max_evals {
        evals += 1;
        let (a_lo, f_lo, s_lo) = lo;
        let (a_hi, f_hi, _) = hi;
        let width = (a_hi - a_lo).abs();
        if width <= T::epsilon() * a_lo.abs().max(T::one()) {
            break;
        }
        // Safeguarded quadratic interpolation.
        let denom = T::lit(2.0) * (f_hi - f_lo - s_lo * (a_hi - a_lo));
        let mut a_j = if denom > T::zero() {
            a_lo - s_lo * (a_hi - a_lo) * (a_hi - a_lo) / denom
        } else {
            (a_lo + a_hi) * T::lit(0.5)
        };
        let (min_a, max_a) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
        let margin = T::lit(0.1) * width;
        if !(a_j > min_a + margin && a_j < max_a - margin) {
            a_j = (a_lo + a_hi) * T::lit(0.5);
        }
        let (xn, fa, ga, sa) = try_at(a_j);
        if !fa.is_finite() || fa > f0 + c1 * a_j * slope0 || fa >= f_lo {
            hi = (a_j, if fa.is_finite() { fa } else { T::max_value() }, sa);
        } else {
            if sa.abs() <= -c2 * slope0 {
                return Some(Step { x: xn, f: fa, g: ga });
            }
            if sa * (a_hi - a_lo) >= T::zero() {
                hi = lo;
            }
            lo = (a_j, fa, sa);
            best = Some(Step { x: xn, f: fa, g: ga });
        }
    }
    // Fall back to the best sufficient-decrease point seen, if it moved.
    best.filter(|s| s.f < f0)
}

#[allow(clippy::too_many_arguments)]
fn newton_polish<T: Real, F: LogTarget<T>>(
    target: &F,
    eval: &impl Fn(&[T]) -> (T, Vec<T>),
    x: &mut Vec<T>,
    f: &mut T,
    g: &mut Vec<T>,
    tol: T,
    iters: &mut usize,
    max_iters: usize,
) {
    let mut stalls = 0;
    while *iters < max_iters && sup_norm(g) > tol && stalls < 3 {
        *iters += 1;
        // Hessian of f = -target is -H_target.
        let mut a = target.hessian(x).scale(-T::one()).symmetrized();
        let scale = a.max_abs().max(T::one());
        let mut lambda = T::zero();
        let chol = loop {
            let mut trial = a.clone();
            trial.add_diagonal(lambda);
            if let Some(l) = trial.cholesky() {
                break Some(l);
            }
            lambda = if lambda == T::zero() {
                T::lit(1e-10) * scale
            } else {
                lambda * T::lit(10.0)
            };
            if lambda > T::lit(1e6) * scale {
                break None;
            }
        };
        let Some(l) = chol else { break };
        a.add_diagonal(lambda);
        let d: Vec<T> = l.cholesky_solve(g).into_iter().map(|v| -v).collect();

        let g_norm = sup_norm(g);
        let resolution = T::lit(8.0) * T::epsilon() * f.abs().max(T::one());
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let xn = axpy(x, step, &d);
            let (fnew, gnew) = eval(&xn);
            let improves = fnew < *f;
            let neutral = fnew.is_finite() && fnew - *f <= resolution && sup_norm(&gnew) < g_norm;
            if fnew.is_finite() && (improves || neutral) {
                *x = xn;
                *f = fnew.min(*f);
                *g = gnew;
                accepted = true;
                break;
            }
            step = step * T::lit(0.5);
        }
        if accepted {
            stalls = 0;
        } else {
            stalls += 1;
        }
    }
}
