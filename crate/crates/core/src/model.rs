//! Truncated Dirichlet process mixture target.
//!
//! The posterior is parametrized on the unconstrained space `[R | theta]`
//! where `R_h = logit(V_h)` are the stick-breaking logits (`K - 1` of them)
//! and `theta_h` the `K` Gaussian component locations. The last weight is the
//! stick remainder, so the `K` weights always sum to one.
//!
//! All mixture quantities are evaluated in log space with one max-subtraction
//! per observation; kernel ordinates far in the tails underflow otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{normal_log_pdf, sigmoid, softplus, Real};
use crate::target::LogTarget;

/// Hyperparameters that fully determine the truncated posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig<T> {
    /// Truncation level (number of mixture components).
    pub k: usize,
    /// DP concentration, held fixed while fitting.
    pub alpha: T,
    /// Kernel standard deviation.
    pub sigma: T,
    /// Mean of the Gaussian base measure.
    pub m0: T,
    /// Standard deviation of the Gaussian base measure.
    pub s0: T,
}

impl<T: Real> ModelConfig<T> {
    pub fn new(k: usize, alpha: T, sigma: T, m0: T, s0: T) -> Result<Self> {
        let cfg = ModelConfig {
            k,
            alpha,
            sigma,
            m0,
            s0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!(
                "truncation level must be at least 2, got {}",
                self.k
            )));
        }
        let positive = |v: T, name: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.alpha, "alpha")?;
        positive(self.sigma, "sigma")?;
        positive(self.s0, "s0")?;
        if !self.m0.is_finite() {
            return Err(Error::InvalidConfig("m0 must be finite".into()));
        }
        Ok(())
    }

    /// Dimension of the unconstrained parameter vector, `2K - 1`.
    pub fn dim(&self) -> usize {
        2 * self.k - 1
    }

    fn log_g0(&self, theta: T) -> T {
        normal_log_pdf(theta, self.m0, self.s0)
    }
}

/// Point in the unconstrained space, stored flat as `[R_1..R_{K-1}, theta_1..theta_K]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedParams<T> {
    k: usize,
    values: Vec<T>,
}

impl<T: Real> UnconstrainedParams<T> {
    pub fn new(k: usize, values: Vec<T>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!(
                "truncation level must be at least 2, got {k}"
            )));
        }
        if values.len() != 2 * k - 1 {
            return Err(Error::DimensionMismatch {
                what: "unconstrained parameter vector",
                expected: 2 * k - 1,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        Ok(UnconstrainedParams { k, values })
    }

    pub fn from_parts(logits: &[T], locations: &[T]) -> Result<Self> {
        let k = locations.len();
        if logits.len() + 1 != k {
            return Err(Error::DimensionMismatch {
                what: "stick logits",
                expected: k.saturating_sub(1),
                actual: logits.len(),
            });
        }
        let mut values = logits.to_vec();
        values.extend_from_slice(locations);
        Self::new(k, values)
    }

    /// Logits from stick fractions in (0, 1).
    pub fn from_stick_fractions(v: &[T], locations: &[T]) -> Result<Self> {
        Self::from_sticks(&StickWeights::from_fractions(v), locations)
    }

    /// Inverse of [`stick_transform`], using the stored complements `1 - V_h`
    /// so logits near the saturated ends are recovered accurately.
    pub fn from_sticks(sticks: &StickWeights<T>, locations: &[T]) -> Result<Self> {
        let logits: Vec<T> = sticks
            .v
            .iter()
            .zip(&sticks.one_minus_v)
            .map(|(&v, &c)| v.ln() - c.ln())
            .collect();
        Self::from_parts(&logits, locations)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn logits(&self) -> &[T] {
        &self.values[..self.k - 1]
    }

    pub fn locations(&self) -> &[T] {
        &self.values[self.k - 1..]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub(crate) fn check_against(&self, cfg: &ModelConfig<T>) -> Result<()> {
        if self.k != cfg.k {
            return Err(Error::DimensionMismatch {
                what: "parameters vs model truncation",
                expected: cfg.dim(),
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

/// Stick fractions and the mixture weights they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct StickWeights<T> {
    /// Stick fractions `V_1..V_{K-1}`, each in (0, 1).
    pub v: Vec<T>,
    /// `1 - V_h`, computed without cancellation.
    pub one_minus_v: Vec<T>,
    /// Mixture weights `pi_1..pi_K`; `pi_K` is the stick remainder.
    pub pi: Vec<T>,
    /// `log pi_h`, computed without forming `pi_h` first.
    pub log_pi: Vec<T>,
}

impl<T: Real> StickWeights<T> {
    /// Weights from stick fractions directly (no logit step).
    pub fn from_fractions(v: &[T]) -> Self {
        let log_v: Vec<T> = v.iter().map(|&v| v.ln()).collect();
        let log_1mv: Vec<T> = v.iter().map(|&v| (-v).ln_1p()).collect();
        let comp = v.iter().map(|&v| T::one() - v).collect();
        Self::assemble(v.to_vec(), comp, &log_v, &log_1mv)
    }

    fn assemble(v: Vec<T>, one_minus_v: Vec<T>, log_v: &[T], log_1mv: &[T]) -> Self {
        let k = v.len() + 1;
        let mut pi = Vec::with_capacity(k);
        let mut log_pi = Vec::with_capacity(k);
        let mut log_rest = T::zero();
        let mut rest = T::one();
        for h in 0..k - 1 {
            log_pi.push(log_rest + log_v[h]);
            pi.push(v[h] * rest);
            log_rest = log_rest + log_1mv[h];
            rest = rest * one_minus_v[h];
        }
        log_pi.push(log_rest);
        pi.push(rest);
        StickWeights {
            v,
            one_minus_v,
            pi,
            log_pi,
        }
    }
}

/// Maps stick logits `R` to fractions `V = sigmoid(R)` and weights `pi`.
pub fn stick_transform<T: Real>(logits: &[T]) -> StickWeights<T> {
    let v: Vec<T> = logits.iter().map(|&r| sigmoid(r)).collect();
    let comp: Vec<T> = logits.iter().map(|&r| sigmoid(-r)).collect();
    let log_v: Vec<T> = logits.iter().map(|&r| -softplus(-r)).collect();
    let log_1mv: Vec<T> = logits.iter().map(|&r| -softplus(r)).collect();
    StickWeights::assemble(v, comp, &log_v, &log_1mv)
}

/// Per-observation mixture quantities: `log m_i`, responsibilities `r_ih` and
/// the stick-logit sensitivities `A_ij = r_ij - V_j sum_{h >= j} r_ih`.
#[derive(Debug, Clone)]
pub struct Responsibilities<T> {
    pub log_m: Vec<T>,
    /// `n x K`.
    pub r: Matrix<T>,
    /// `n x (K - 1)`.
    pub a: Matrix<T>,
}

impl<T: Real> Responsibilities<T> {
    pub fn compute(cfg: &ModelConfig<T>, p: &UnconstrainedParams<T>, y: &[T]) -> Result<Self> {
        check_inputs(cfg, p, y)?;
        let sticks = stick_transform(p.logits());
        let k = cfg.k;
        let n = y.len();
        let kernel = Kernel::new(cfg.sigma);
        let mut log_m = Vec::with_capacity(n);
        let mut r = Matrix::zeros(n, k);
        let mut a = Matrix::zeros(n, k - 1);
        let mut buf = vec![T::zero(); k];
        for (i, &yi) in y.iter().enumerate() {
            log_m.push(kernel.responsibilities(yi, &sticks.log_pi, p.locations(), &mut buf));
            r.row_mut(i).copy_from_slice(&buf);
            fill_sensitivities(&buf, &sticks.v, a.row_mut(i));
        }
        Ok(Responsibilities { log_m, r, a })
    }
}

struct Kernel<T> {
    log_norm: T,
    half_inv_var: T,
}

impl<T: Real> Kernel<T> {
    fn new(sigma: T) -> Self {
        Kernel {
            log_norm: -sigma.ln() - T::lit(0.5) * T::TAU().ln(),
            half_inv_var: T::lit(0.5) / (sigma * sigma),
        }
    }

    #[inline]
    fn log_pdf(&self, y: T, theta: T) -> T {
        let d = y - theta;
        self.log_norm - d * d * self.half_inv_var
    }

    /// Returns `log m_i` and writes `r_i.` into `out`.
    #[inline]
    fn responsibilities(&self, y: T, log_pi: &[T], theta: &[T], out: &mut [T]) -> T {
        let mut mx = T::neg_infinity();
        for h in 0..out.len() {
            let t = log_pi[h] + self.log_pdf(y, theta[h]);
            out[h] = t;
            mx = mx.max(t);
        }
        let s = T::exp_shifted_sum(out, mx);
        let inv = T::one() / s;
        out.iter_mut().for_each(|t| *t = *t * inv);
        mx + s.ln()
    }

    /// `log m_i` only.
    #[inline]
    fn log_mixture(&self, y: T, log_pi: &[T], theta: &[T], buf: &mut [T]) -> T {
        let mut mx = T::neg_infinity();
        for h in 0..buf.len() {
            let t = log_pi[h] + self.log_pdf(y, theta[h]);
            buf[h] = t;
            mx = mx.max(t);
        }
        mx + T::exp_shifted_sum(buf, mx).ln()
    }
}

#[inline]
fn fill_sensitivities<T: Real>(r: &[T], v: &[T], out: &mut [T]) {
    // Suffix sums of r avoid the cancellation in 1 - sum_{h<j} r_h.
    let k = r.len();
    let mut tail = r[k - 1];
    for j in (0..k - 1).rev() {
        tail = tail + r[j];
        out[j] = r[j] - v[j] * tail;
    }
}

fn check_inputs<T: Real>(cfg: &ModelConfig<T>, p: &UnconstrainedParams<T>, y: &[T]) -> Result<()> {
    cfg.validate()?;
    p.check_against(cfg)?;
    if y.is_empty() {
        return Err(Error::InvalidInput("at least one observation is required".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("observations must be finite".into()));
    }
    Ok(())
}

/// Unnormalized log-posterior `l(R, theta)` up to an additive constant.
pub fn log_unnorm_posterior<T: Real>(
    cfg: &ModelConfig<T>,
    p: &UnconstrainedParams<T>,
    y: &[T],
) -> Result<T> {
    check_inputs(cfg, p, y)?;
    Ok(log_posterior_flat(cfg, p.as_slice(), y))
}

/// Gradient of [`log_unnorm_posterior`] in the flat `[R | theta]` layout.
pub fn gradient<T: Real>(cfg: &ModelConfig<T>, p: &UnconstrainedParams<T>, y: &[T]) -> Result<Vec<T>> {
    check_inputs(cfg, p, y)?;
    Ok(derivatives_flat(cfg, p.as_slice(), y, false).1)
}

/// Hessian of [`log_unnorm_posterior`]; exactly symmetric.
pub fn hessian<T: Real>(cfg: &ModelConfig<T>, p: &UnconstrainedParams<T>, y: &[T]) -> Result<Matrix<T>> {
    check_inputs(cfg, p, y)?;
    Ok(derivatives_flat(cfg, p.as_slice(), y, true)
        .2
        .expect("hessian requested"))
}

fn log_stick_prior<T: Real>(alpha: T, logits: &[T]) -> T {
    logits
        .iter()
        .map(|&r| -softplus(-r) - alpha * softplus(r))
        .sum()
}

pub(crate) fn log_posterior_flat<T: Real>(cfg: &ModelConfig<T>, x: &[T], y: &[T]) -> T {
    let k = cfg.k;
    let (logits, theta) = x.split_at(k - 1);
    let sticks = stick_transform(logits);
    let kernel = Kernel::new(cfg.sigma);
    let mut buf = vec![T::zero(); k];
    let lik: T = y
        .iter()
        .map(|&yi| kernel.log_mixture(yi, &sticks.log_pi, theta, &mut buf))
        .sum();
    let prior_theta: T = theta.iter().map(|&t| cfg.log_g0(t)).sum();
    log_stick_prior(cfg.alpha, logits) + prior_theta + lik
}

/// Value, gradient and optionally the Hessian in one pass over the data.
///
/// The likelihood part of the Hessian is `-sum_i w_i w_i^T` plus terms linear
/// in `A` and `r`, with `w_i = (A_i., r_i. * (y_i - theta.) / sigma^2)`.
pub(crate) fn derivatives_flat<T: Real>(
    cfg: &ModelConfig<T>,
    x: &[T],
    y: &[T],
    with_hessian: bool,
) -> (T, Vec<T>, Option<Matrix<T>>) {
    let k = cfg.k;
    let d = 2 * k - 1;
    let (logits, theta) = x.split_at(k - 1);
    let sticks = stick_transform(logits);
    let v = &sticks.v;
    let kernel = Kernel::new(cfg.sigma);
    let inv_var = T::one() / (cfg.sigma * cfg.sigma);
    let inv_s0_sq = T::one() / (cfg.s0 * cfg.s0);

    let mut r = vec![T::zero(); k];
    let mut w = vec![T::zero(); d];
    // sum_i A_ij, sum_i r_ih d_ih, sum_i r_ih (d_ih^2 - 1/sigma^2)
    let mut sum_a = vec![T::zero(); k - 1];
    let mut sum_e = vec![T::zero(); k];
    let mut sum_q = vec![T::zero(); k];
    let mut outer = if with_hessian {
        Some(Matrix::<T>::zeros(d, d))
    } else {
        None
    };
    let mut lik = T::zero();

    for &yi in y {
        lik = lik + kernel.responsibilities(yi, &sticks.log_pi, theta, &mut r);
        fill_sensitivities(&r, v, &mut w[..k - 1]);
        for h in 0..k {
            let dh = (yi - theta[h]) * inv_var;
            w[k - 1 + h] = r[h] * dh;
            if with_hessian {
                sum_q[h] = sum_q[h] + r[h] * (dh * dh - inv_var);
            }
        }
        for j in 0..k - 1 {
            sum_a[j] = sum_a[j] + w[j];
        }
        for h in 0..k {
            sum_e[h] = sum_e[h] + w[k - 1 + h];
        }
        if let Some(m) = outer.as_mut() {
            for a in 0..d {
                let wa = w[a];
                if wa == T::zero() {
                    continue;
                }
                let row = m.row_mut(a);
                for b in a..d {
                    row[b] = row[b] + wa * w[b];
                }
            }
        }
    }

    let value = log_stick_prior(cfg.alpha, logits)
        + theta.iter().map(|&t| cfg.log_g0(t)).sum::<T>()
        + lik;

    let one_plus_alpha = T::one() + cfg.alpha;
    let mut grad = Vec::with_capacity(d);
    for j in 0..k - 1 {
        grad.push(T::one() - one_plus_alpha * v[j] + sum_a[j]);
    }
    for h in 0..k {
        grad.push(-(theta[h] - cfg.m0) * inv_s0_sq + sum_e[h]);
    }

    let hess = outer.map(|m| {
        let mut hmat = Matrix::zeros(d, d);
        let two = T::lit(2.0);
        for a in 0..d {
            for b in a..d {
                let mut val = -m[(a, b)];
                match (a < k - 1, b < k - 1) {
                    (true, true) => {
                        let (j, l) = (a, b);
                        if j == l {
                            val = val - one_plus_alpha * v[j] * (T::one() - v[j])
                                + (T::one() - two * v[j]) * sum_a[j];
                        } else {
                            val = val - v[j] * sum_a[l];
                        }
                    }
                    (true, false) => {
                        let (j, h) = (a, b - (k - 1));
                        let dlog_pi = if j == h {
                            T::one() - v[j]
                        } else if j < h {
                            -v[j]
                        } else {
                            T::zero()
                        };
                        val = val + dlog_pi * sum_e[h];
                    }
                    (false, false) => {
                        if a == b {
                            let h = a - (k - 1);
                            val = val - inv_s0_sq + sum_q[h];
                        }
                    }
                    (false, true) => unreachable!("upper triangle only"),
                }
                hmat[(a, b)] = val;
                hmat[(b, a)] = val;
            }
        }
        hmat
    });

    (value, grad, hess)
}

/// The truncated DPM posterior as a [`LogTarget`].
#[derive(Debug, Clone, Copy)]
pub struct DpmPosterior<'a, T> {
    cfg: &'a ModelConfig<T>,
    y: &'a [T],
}

impl<'a, T: Real> DpmPosterior<'a, T> {
    pub fn new(cfg: &'a ModelConfig<T>, y: &'a [T]) -> Result<Self> {
        cfg.validate()?;
        if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "observations must be non-empty and finite".into(),
            ));
        }
        Ok(DpmPosterior { cfg, y })
    }

    pub fn config(&self) -> &ModelConfig<T> {
        self.cfg
    }

    pub fn data(&self) -> &[T] {
        self.y
    }
}

impl<T: Real> LogTarget<T> for DpmPosterior<'_, T> {
    fn dim(&self) -> usize {
        self.cfg.dim()
    }

    fn log_density(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim());
        log_posterior_flat(self.cfg, x, self.y)
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        derivatives_flat(self.cfg, x, self.y, false).1
    }

    fn hessian(&self, x: &[T]) -> Matrix<T> {
        derivatives_flat(self.cfg, x, self.y, true).2.expect("hessian requested")
    }

    fn value_and_gradient(&self, x: &[T]) -> (T, Vec<T>) {
        let (v, g, _) = derivatives_flat(self.cfg, x, self.y, false);
        (v, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cfg(k: usize) -> ModelConfig<f64> {
        ModelConfig::new(k, 1.0, 1.0, 0.0, 1.0).unwrap()
    }

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    /// Direct evaluation of every term, without log-sum-exp or shared code.
    fn naive_log_posterior(cfg: &ModelConfig<f64>, r: &[f64], theta: &[f64], y: &[f64]) -> f64 {
        let npdf = |x: f64, m: f64, s: f64| {
            (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let v: Vec<f64> = r.iter().map(|r| 1.0 / (1.0 + (-r).exp())).collect();
        let mut pi = vec![];
        for h in 0..cfg.k {
            let mut w = if h < cfg.k - 1 { v[h] } else { 1.0 };
            for l in 0..h.min(cfg.k - 1) {
                w *= 1.0 - v[l];
            }
            pi.push(w);
        }
        let mut total = 0.0;
        for &vh in &v {
            total += vh.ln() + cfg.alpha * (1.0 - vh).ln();
        }
        for &t in theta {
            total += npdf(t, cfg.m0, cfg.s0).ln();
        }
        for &yi in y {
            let m: f64 = (0..cfg.k).map(|h| pi[h] * npdf(yi, theta[h], cfg.sigma)).sum();
            total += m.ln();
        }
        total
    }

    #[test]
    fn stick_transform_examples() {
        let s = stick_transform(&[0.0_f64]);
        assert_eq!(s.v, vec![0.5]);
        assert_eq!(s.pi, vec![0.5, 0.5]);

        let s = stick_transform(&[logit(0.3), logit(0.5)]);
        let want = [0.3, 0.35, 0.35];
        for (a, b) in s.pi.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn stick_weights_sum_to_one_and_match_logs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.random_range(2..40);
            let r: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-8.0..8.0)).collect();
            let s = stick_transform(&r);
            let total: f64 = s.pi.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for (p, lp) in s.pi.iter().zip(&s.log_pi) {
                assert!(*p >= 0.0);
                if *p > 1e-300 {
                    assert!((p.ln() - lp).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn logit_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r: Vec<f64> = (0..50).map(|_| rng.random_range(-30.0..30.0)).collect();
        let s = stick_transform(&r);
        let theta = vec![0.0; 51];
        let back = UnconstrainedParams::from_sticks(&s, &theta).unwrap();
        for (a, b) in back.logits().iter().zip(&r) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn symmetric_point_value_and_zero_gradient() {
        let cfg = unit_cfg(2);
        let p = UnconstrainedParams::from_parts(&[0.0], &[0.0, 0.0]).unwrap();
        let l = log_unnorm_posterior(&cfg, &p, &[0.0]).unwrap();
        assert!((l - (-4.143_110)).abs() < 1e-6, "{l}");
        let g = gradient(&cfg, &p, &[0.0]).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-15), "{g:?}");
        let h = hessian(&cfg, &p, &[0.0]).unwrap();
        assert!(h.is_symmetric());
        assert_eq!(h[(1, 2)], 0.0);
    }

    #[test]
    fn value_is_deterministic_and_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for &k in &[2usize, 5, 20] {
            let cfg = ModelConfig::new(k, 0.7, 0.8, 0.3, 1.7).unwrap();
            let r: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-3.0..3.0)).collect();
            let th: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..30).map(|_| rng.random_range(-4.0..4.0)).collect();
            let p = UnconstrainedParams::from_parts(&r, &th).unwrap();
            let a = log_unnorm_posterior(&cfg, &p, &y).unwrap();
            let b = log_unnorm_posterior(&cfg, &p, &y).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
            let naive = naive_log_posterior(&cfg, &r, &th, &y);
            assert!((a - naive).abs() < 1e-9 * naive.abs().max(1.0), "{a} vs {naive}");
            let (v2, _, _) = derivatives_flat(&cfg, p.as_slice(), &y, true);
            assert!((a - v2).abs() < 1e-10 * a.abs());
        }
    }

    #[test]
    fn tail_observation_lowers_log_posterior() {
        let cfg = unit_cfg(2);
        let p = UnconstrainedParams::from_parts(&[0.3], &[-0.5, 0.4]).unwrap();
        let mut prev = f64::INFINITY;
        for y in [0.0, 2.0, 5.0, 10.0, 50.0, 200.0] {
            let l = log_unnorm_posterior(&cfg, &p, &[y]).unwrap();
            assert!(l.is_finite());
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn swapping_locations_at_equal_weights() {
        let cfg = unit_cfg(2);
        let y = [-1.2, 0.3, 2.2];
        let a = UnconstrainedParams::from_parts(&[0.0], &[-0.7, 1.3]).unwrap();
        let b = UnconstrainedParams::from_parts(&[0.0], &[1.3, -0.7]).unwrap();
        let la = log_unnorm_posterior(&cfg, &a, &y).unwrap();
        let lb = log_unnorm_posterior(&cfg, &b, &y).unwrap();
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn likelihood_is_shift_invariant_in_log_space() {
        let cfg = ModelConfig::new(4, 1.3, 0.6, 0.0, 2.0).unwrap();
        let r = [0.2, -0.4, 1.0];
        let th = [-1.0, 0.0, 0.5, 2.0];
        let y = [-1.1, 0.2, 0.4, 1.9, 2.5];
        let shift = 1000.0;
        let th_s: Vec<f64> = th.iter().map(|t| t + shift).collect();
        let y_s: Vec<f64> = y.iter().map(|t| t + shift).collect();
        let p = UnconstrainedParams::from_parts(&r, &th).unwrap();
        let ps = UnconstrainedParams::from_parts(&r, &th_s).unwrap();
        let l = log_unnorm_posterior(&cfg, &p, &y).unwrap();
        let ls = log_unnorm_posterior(&cfg, &ps, &y_s).unwrap();
        let g0 = |ts: &[f64]| ts.iter().map(|&t| normal_log_pdf(t, cfg.m0, cfg.s0)).sum::<f64>();
        let l_adj = ls - g0(&th_s) + g0(&th);
        assert!((l - l_adj).abs() < 1e-6, "{l} vs {l_adj}");
    }

    #[test]
    fn responsibilities_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = unit_cfg(6);
        let r: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
        let th: Vec<f64> = (0..6).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y = [-300.0, -40.0, 0.0, 1.0, 45.0, 1e4];
        let p = UnconstrainedParams::from_parts(&r, &th).unwrap();
        let resp = Responsibilities::compute(&cfg, &p, &y).unwrap();
        for (i, row) in resp.r.rows().enumerate() {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-10);
            assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
            assert!(resp.log_m[i].is_finite());
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cfg = unit_cfg(3);
        let p = UnconstrainedParams::from_parts(&[0.0], &[0.0, 1.0]).unwrap();
        assert!(matches!(
            log_unnorm_posterior(&cfg, &p, &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(gradient(&cfg, &p, &[0.0]).is_err());
        assert!(hessian(&cfg, &p, &[0.0]).is_err());
        let p3 = UnconstrainedParams::from_parts(&[0.0, 0.0], &[0.0, 1.0, 2.0]).unwrap();
        assert!(log_unnorm_posterior(&cfg, &p3, &[]).is_err());
        assert!(UnconstrainedParams::new(3, vec![0.0; 4]).is_err());
        assert!(UnconstrainedParams::new(2, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::new(1, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(ModelConfig::new(2, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(ModelConfig::new(2, 1.0, -1.0, 0.0, 1.0).is_err());
        assert!(ModelConfig::new(2, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn single_precision_agrees_with_double() {
        let cfg64 = ModelConfig::new(5, 0.8, 1.0, 0.0, 1.0).unwrap();
        let cfg32 = ModelConfig::new(5, 0.8_f32, 1.0, 0.0, 1.0).unwrap();
        let x64 = [0.1, -0.3, 0.5, 0.0, -2.0, -0.5, 0.2, 1.0, 2.5];
        let y64 = [-2.1, -0.4, 0.3, 0.9, 2.2, 2.8];
        let x32: Vec<f32> = x64.iter().map(|&v| v as f32).collect();
        let y32: Vec<f32> = y64.iter().map(|&v| v as f32).collect();
        let (v64, g64, _) = derivatives_flat(&cfg64, &x64, &y64, false);
        let (v32, g32, _) = derivatives_flat(&cfg32, &x32, &y32, false);
        assert!(((v32 as f64) - v64).abs() < 1e-4 * v64.abs());
        for (a, b) in g32.iter().zip(&g64) {
            assert!(((*a as f64) - b).abs() < 1e-4 * b.abs().max(1.0));
        }
        let s = stick_transform(&x32[..4]);
        assert!((s.pi.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }
}
