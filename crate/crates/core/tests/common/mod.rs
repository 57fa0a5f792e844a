//! Shared oracles for the integration and acceptance tests.
#![allow(dead_code)]

use dpm_laplace::laplace::{find_mode_of, gaussian_from_target};
use dpm_laplace::slice::{simulate_joint, slice_sweep};
use dpm_laplace::stats::{batch_means_se, mean};
use dpm_laplace::{
    gradient, hessian, log_unnorm_posterior, sample_skew_laplace, AlphaPrior, AlphaUpdate,
    LaplaceFit, LogTarget, Matrix, ModeOptions, ModelConfig, Real, SkewWeightContext,
    SliceOptions, SlicePrior, SliceState, UnconstrainedParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Finite differences

pub struct DerivativeErrors {
    pub instances: usize,
    pub max_grad_rel: f64,
    pub max_hess_rel: f64,
}

fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

/// `|a - b| / max(|b|, 1)`, maximized over entries.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Random instance: sticks and locations spread wide enough to exercise both
/// tails of the logistic transform.
pub fn random_instance(k: usize, n: usize, rng: &mut impl Rng) -> (ModelConfig<f64>, UnconstrainedParams<f64>, Vec<f64>) {
    let alpha = rng.random_range(0.2..3.0);
    let sigma = rng.random_range(0.4..1.5);
    let s0 = rng.random_range(0.5..3.0);
    let cfg = ModelConfig::new(k, alpha, sigma, rng.random_range(-1.0..1.0), s0).unwrap();
    let mut values: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-3.0..3.0)).collect();
    values.extend((0..k).map(|_| 2.0 * f64::sample_standard_normal(rng)));
    let y = (0..n).map(|_| 2.0 * f64::sample_standard_normal(rng)).collect();
    (cfg, UnconstrainedParams::new(k, values).unwrap(), y)
}

/// Central differences of the value (for the gradient) and of the analytic
/// gradient (for the Hessian) on `instances` random problems cycling through
/// `K in {2, 5, 20}` and `n in {5, 50}`.
pub fn derivative_check(instances: usize, seed: u64) -> DerivativeErrors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = [(2, 5), (2, 50), (5, 5), (5, 50), (20, 5), (20, 50)];
    let (mut g_err, mut h_err) = (0.0_f64, 0.0_f64);
    for t in 0..instances {
        let (k, n) = shapes[t % shapes.len()];
        let (cfg, p, y) = random_instance(k, n, &mut rng);
        let x = p.as_slice().to_vec();
        let d = x.len();
        let at = |v: &[f64]| UnconstrainedParams::new(k, v.to_vec()).unwrap();
        let g = gradient(&cfg, &p, &y).unwrap();
        let h = hessian(&cfg, &p, &y).unwrap();
        let mut g_fd = vec![0.0; d];
        let mut h_fd = Matrix::zeros(d, d);
        for j in 0..d {
            let e = fd_step(x[j]);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += e;
            xm[j] -= e;
            let (pp, pm) = (at(&xp), at(&xm));
            g_fd[j] = (log_unnorm_posterior(&cfg, &pp, &y).unwrap()
                - log_unnorm_posterior(&cfg, &pm, &y).unwrap())
                / (2.0 * e);
            let (gp, gm) = (gradient(&cfg, &pp, &y).unwrap(), gradient(&cfg, &pm, &y).unwrap());
            for i in 0..d {
                h_fd[(i, j)] = (gp[i] - gm[i]) / (2.0 * e);
            }
        }
        g_err = g_err.max(rel_err(&g, &g_fd));
        h_err = h_err.max(rel_err(h.as_slice(), h_fd.symmetrized().as_slice()));
    }
    DerivativeErrors {
        instances,
        max_grad_rel: g_err,
        max_hess_rel: h_err,
    }
}

// ---------------------------------------------------------------------------
// One-dimensional skewed target `log 2 + log phi(x) + log Phi(3x)`

pub struct SkewNormalTarget;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse Mills ratio `phi(z) / Phi(z)`.
fn mills(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / std_normal_cdf(z)
}

impl SkewNormalTarget {
    pub fn value(x: f64) -> f64 {
        std::f64::consts::LN_2 - 0.5 * x * x - 0.5 * std::f64::consts::TAU.ln() + std_normal_cdf(3.0 * x).ln()
    }
}

impl LogTarget<f64> for SkewNormalTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        Self::value(x[0])
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![-x[0] + 3.0 * mills(3.0 * x[0])]
    }

    fn hessian(&self, x: &[f64]) -> Matrix<f64> {
        let z = 3.0 * x[0];
        let r = mills(z);
        Matrix::from_row_major(1, 1, vec![-1.0 - 9.0 * r * (z + r)])
    }
}

/// Laplace fit of [`SkewNormalTarget`] at its located mode.
pub fn skew_normal_fit() -> LaplaceFit<f64> {
    let (mode, ..) = find_mode_of(&SkewNormalTarget, &[0.0], &ModeOptions::default()).unwrap();
    gaussian_from_target(&SkewNormalTarget, &mode).unwrap()
}

/// The corrected density `2 f_lap(x) w(x)` on a fine grid, renormalized by
/// trapezoid quadrature. Returns `(xs, density, dx)`.
pub fn skew_reference(fit: &LaplaceFit<f64>, half_width_sd: f64, points: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let ctx = SkewWeightContext::new(fit, SkewNormalTarget).unwrap();
    let (m, s) = (fit.mode[0], fit.cov[(0, 0)].sqrt());
    let (lo, hi) = (m - half_width_sd * s, m + half_width_sd * s);
    let dx = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|i| lo + i as f64 * dx).collect();
    let mut f: Vec<f64> = xs.iter().map(|&x| ctx.log_density(&[x]).exp()).collect();
    let total = dx * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[points - 1]));
    f.iter_mut().for_each(|v| *v /= total);
    (xs, f, dx)
}

pub fn skew_normal_draws(n: usize, seed: u64) -> (LaplaceFit<f64>, Vec<f64>) {
    let fit = skew_normal_fit();
    let ctx = SkewWeightContext::new(&fit, SkewNormalTarget).unwrap();
    let draws = sample_skew_laplace(&ctx, n, seed);
    let xs = draws.draws.as_slice().to_vec();
    (fit, xs)
}

/// Histogram TV between draws and the reference over `bins` equal bins on
/// `mode +- 5 sd`, with one extra bin for each tail.
pub fn skew_histogram_tv(n: usize, bins: usize, seed: u64) -> f64 {
    let (fit, xs) = skew_normal_draws(n, seed);
    let (m, s) = (fit.mode[0], fit.cov[(0, 0)].sqrt());
    let (lo, hi) = (m - 5.0 * s, m + 5.0 * s);
    let width = (hi - lo) / bins as f64;
    let bin_of = |x: f64| -> usize {
        if x < lo {
            0
        } else if x >= hi {
            bins + 1
        } else {
            1 + (((x - lo) / width) as usize).min(bins - 1)
        }
    };
    let mut counts = vec![0usize; bins + 2];
    for &x in &xs {
        counts[bin_of(x)] += 1;
    }
    let (grid, f, dx) = skew_reference(&fit, 12.0, 240_001);
    let mut mass = vec![0.0; bins + 2];
    for (&x, &v) in grid.iter().zip(&f) {
        mass[bin_of(x)] += v * dx;
    }
    0.5 * counts
        .iter()
        .zip(&mass)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum::<f64>()
}

/// `sup |F_n - F|` between the empirical CDF of the draws and the quadrature
/// CDF of the reference.
pub fn skew_cdf_discrepancy(n: usize, seed: u64) -> f64 {
    let (fit, mut xs) = skew_normal_draws(n, seed);
    xs.sort_by(f64::total_cmp);
    let (grid, f, dx) = skew_reference(&fit, 12.0, 240_001);
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for i in 0..grid.len() {
        if i > 0 {
            acc += 0.5 * (f[i - 1] + f[i]) * dx;
        }
        cdf.push(acc);
    }
    let at = |x: f64| {
        let j = grid.partition_point(|&g| g <= x);
        if j == 0 {
            0.0
        } else if j == grid.len() {
            1.0
        } else {
            let t = (x - grid[j - 1]) / dx;
            cdf[j - 1] + t * (cdf[j] - cdf[j - 1])
        }
    };
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let fx = at(x);
            (fx - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - fx).abs())
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Slice sampler

pub fn gamma_prior() -> SlicePrior<f64> {
    SlicePrior {
        sigma: 1.0,
        m0: 0.0,
        s0: 1.0,
        alpha: AlphaPrior::Gamma { shape: 3.0, rate: 3.0 },
    }
}

/// Mean of `V_1` over `sweeps` likelihood-free sweeps at fixed `alpha`.
/// Errors if any sweep breaks an invariant.
pub fn prior_reproduction(alpha: f64, n: usize, sweeps: usize, seed: u64) -> Result<f64, String> {
    let prior = SlicePrior {
        alpha: AlphaPrior::Fixed { value: alpha },
        ..gamma_prior()
    };
    let opts = SliceOptions {
        ignore_likelihood: true,
        ..SliceOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..n).map(|_| f64::sample_standard_normal(&mut rng)).collect();
    let mut state = SliceState::initial(&prior, &y);
    let mut total = 0.0;
    for s in 0..sweeps {
        slice_sweep(&mut state, &prior, &y, &opts, &mut rng).map_err(|e| e.to_string())?;
        state.check_invariants().map_err(|e| format!("sweep {s}: {e}"))?;
        total += state.v[0];
    }
    Ok(total / sweeps as f64)
}

pub struct GewekeStat {
    pub name: &'static str,
    pub forward: f64,
    pub successive: f64,
    pub se: f64,
}

impl GewekeStat {
    pub fn z(&self) -> f64 {
        (self.forward - self.successive) / self.se
    }
}

/// Marginal-conditional simulator against the successive-conditional chain
/// (sweep, then redraw `y` given labels and atoms). Statistics: mean of `y`,
/// the atom of observation 1, and `alpha`.
pub fn geweke(update: AlphaUpdate, n: usize, m: usize, seed: u64) -> Result<Vec<GewekeStat>, String> {
    let prior = gamma_prior();
    let opts = SliceOptions {
        alpha_update: update,
        ..SliceOptions::default()
    };
    let stats = |s: &SliceState<f64>, y: &[f64]| [mean(y), s.theta[s.c[0]], s.alpha];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fwd = vec![Vec::with_capacity(m); 3];
    for _ in 0..m {
        let (s, y) = simulate_joint(&prior, n, &mut rng);
        for (k, v) in stats(&s, &y).into_iter().enumerate() {
            fwd[k].push(v);
        }
    }
    let (mut state, mut y) = simulate_joint(&prior, n, &mut rng);
    let mut bwd = vec![Vec::with_capacity(m); 3];
    for it in 0..m {
        slice_sweep(&mut state, &prior, &y, &opts, &mut rng).map_err(|e| e.to_string())?;
        state.check_invariants().map_err(|e| format!("sweep {it}: {e}"))?;
        for (yi, &c) in y.iter_mut().zip(&state.c) {
            *yi = state.theta[c] + prior.sigma * f64::sample_standard_normal(&mut rng);
        }
        for (k, v) in stats(&state, &y).into_iter().enumerate() {
            bwd[k].push(v);
        }
    }
    Ok(["mean y", "theta_c1", "alpha"]
        .into_iter()
        .enumerate()
        .map(|(k, name)| GewekeStat {
            name,
            forward: mean(&fwd[k]),
            successive: mean(&bwd[k]),
            se: (batch_means_se(&fwd[k], 50).powi(2) + batch_means_se(&bwd[k], 50).powi(2)).sqrt(),
        })
        .collect())
}
