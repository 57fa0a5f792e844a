//! Conditional slice sampler for the untruncated DP mixture of normals.
//!
//! Dependent-slice variant: `u_i ~ U(0, pi_{c_i})`, so a sweep only needs the
//! components with `pi_h > min u`. Components beyond the largest occupied label
//! are integrated out at the start of each sweep and re-drawn from the prior
//! when the slices require them.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StickWeights;
use crate::scalar::Real;

/// Prior on the DP concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaPrior<T> {
    Fixed { value: T },
    Gamma { shape: T, rate: T },
}

impl<T: Real> AlphaPrior<T> {
    pub fn mean(&self) -> T {
        match *self {
            AlphaPrior::Fixed { value } => value,
            AlphaPrior::Gamma { shape, rate } => shape / rate,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaPrior::Fixed { value } => value > T::zero() && value.is_finite(),
            AlphaPrior::Gamma { shape, rate } => {
                shape > T::zero() && rate > T::zero() && shape.is_finite() && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid concentration prior {self:?}")))
        }
    }
}

/// How the concentration is resampled under a Gamma prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaUpdate {
    /// Draw from `alpha | sticks, labels`, right after the stick update.
    #[default]
    StickConditional,
    /// Beta auxiliary plus two-component Gamma mixture given the number of
    /// occupied clusters, at the end of the sweep.
    EscobarWest,
}

/// Kernel, base measure and concentration prior of the sampled model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePrior<T> {
    pub sigma: T,
    pub m0: T,
    pub s0: T,
    pub alpha: AlphaPrior<T>,
}

impl<T: Real> SlicePrior<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero() && self.s0 > T::zero() && self.m0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "slice prior needs sigma > 0 and s0 > 0, got sigma={} s0={}",
                self.sigma, self.s0
            )));
        }
        self.alpha.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceOptions {
    pub alpha_update: AlphaUpdate,
    /// Replace the likelihood by 1; the chain then samples the prior.
    pub ignore_likelihood: bool,
    /// Hard cap on instantiated components.
    pub max_components: usize,
}

impl Default for SliceOptions {
    fn default() -> Self {
        SliceOptions {
            alpha_update: AlphaUpdate::default(),
            ignore_likelihood: false,
            max_components: 100_000,
        }
    }
}

/// Full sampler state. Labels are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceState<T> {
    pub c: Vec<usize>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub theta: Vec<T>,
    pub alpha: T,
}

impl<T: Real> SliceState<T> {
    /// Single cluster at the data mean, concentration at its prior mean.
    pub fn initial(prior: &SlicePrior<T>, y: &[T]) -> Self {
        let n = y.len();
        let alpha = prior.alpha.mean();
        let mean = if n == 0 {
            prior.m0
        } else {
            y.iter().copied().sum::<T>() / T::from_usize(n).unwrap()
        };
        let v1 = T::one() / (T::one() + alpha);
        SliceState {
            c: vec![0; n],
            u: vec![v1 * T::lit(0.5); n],
            v: vec![v1],
            theta: vec![mean],
            alpha,
        }
    }

    /// Number of instantiated components.
    pub fn h(&self) -> usize {
        self.v.len()
    }

    pub fn weights(&self) -> Vec<T> {
        let mut rem = T::one();
        self.v
            .iter()
            .map(|&v| {
                let p = v * rem;
                rem = rem * (T::one() - v);
                p
            })
            .collect()
    }

    /// Mass not assigned to instantiated components, `prod (1 - V_h)`.
    pub fn remainder(&self) -> T {
        self.v.iter().fold(T::one(), |r, &v| r * (T::one() - v))
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.h()];
        for &c in &self.c {
            n[c] += 1;
        }
        n
    }

    pub fn occupied(&self) -> usize {
        self.counts().iter().filter(|&&m| m > 0).count()
    }

    pub fn snapshot(&self) -> SliceSnapshot<T> {
        SliceSnapshot {
            v: self.v.clone(),
            theta: self.theta.clone(),
            alpha: self.alpha,
            occupied: self.occupied(),
        }
    }

    /// Post-sweep invariants: every `u_i < pi_{c_i}`, labels in range, sticks
    /// in (0, 1), `alpha > 0`, and the instantiated mass exceeds `1 - min u`.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Internal(m));
        if self.v.len() != self.theta.len() || self.c.len() != self.u.len() {
            return fail("slice state vectors have inconsistent lengths".into());
        }
        if !(self.alpha > T::zero() && self.alpha.is_finite()) {
            return fail(format!("alpha = {} is not positive", self.alpha));
        }
        if let Some(v) = self.v.iter().find(|&&v| !(v > T::zero() && v < T::one())) {
            return fail(format!("stick {v} outside (0, 1)"));
        }
        let pi = self.weights();
        for (i, (&c, &u)) in self.c.iter().zip(&self.u).enumerate() {
            if c >= pi.len() {
                return fail(format!("label {c} of observation {i} exceeds H = {}", pi.len()));
            }
            if !(u > T::zero() && u < pi[c]) {
                return fail(format!("slice u[{i}] = {u} not in (0, pi[{c}] = {})", pi[c]));
            }
        }
        if self.counts().iter().sum::<usize>() != self.c.len() {
            return fail("cluster counts do not sum to n".into());
        }
        if let Some(umin) = self.u.iter().copied().reduce(T::min) {
            if self.remainder() >= umin {
                return fail(format!("remainder {} not below min u {umin}", self.remainder()));
            }
        }
        Ok(())
    }
}

/// Stored state after one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSnapshot<T> {
    pub v: Vec<T>,
    pub theta: Vec<T>,
    pub alpha: T,
    pub occupied: usize,
}

impl<T> SliceSnapshot<T> {
    pub fn h(&self) -> usize {
        self.v.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput<T> {
    /// One snapshot per sweep, burn-in included.
    pub draws: Vec<SliceSnapshot<T>>,
    /// Seconds since the chain started, recorded after each sweep.
    pub timestamps: Vec<f64>,
    pub wall_seconds: f64,
    pub seed: u64,
    pub burn_in: usize,
}

impl<T> ChainOutput<T> {
    pub fn kept(&self) -> &[SliceSnapshot<T>] {
        &self.draws[self.burn_in.min(self.draws.len())..]
    }
}

impl<T: PartialEq> ChainOutput<T> {
    /// Equality ignoring wall-clock fields.
    pub fn same_draws(&self, other: &Self) -> bool {
        self.draws == other.draws && self.seed == other.seed && self.burn_in == other.burn_in
    }
}

fn clamp_stick<T: Real>(v: T) -> T {
    let eps = T::epsilon();
    v.max(eps).min(T::one() - eps)
}

fn draw_atom<T: Real, R: Rng + ?Sized>(prior: &SlicePrior<T>, rng: &mut R) -> T {
    prior.m0 + prior.s0 * T::sample_standard_normal(rng)
}

/// One sweep, in order: atoms, sticks, concentration, slices, extension,
/// allocations (and the Escobar-West concentration step if selected).
pub fn slice_sweep<T: Real, R: Rng + ?Sized>(
    state: &mut SliceState<T>,
    prior: &SlicePrior<T>,
    y: &[T],
    opts: &SliceOptions,
    rng: &mut R,
) -> Result<()> {
    let n = y.len();
    if state.c.len() != n || state.u.len() != n {
        return Err(Error::DimensionMismatch {
            what: "slice state labels",
            expected: n,
            actual: state.c.len(),
        });
    }

    // Components past the last occupied one carry no information.
    let h = state.c.iter().copied().max().map_or(1, |m| m + 1);
    state.v.resize(h, T::lit(0.5));
    state.theta.resize(h, prior.m0);
    let counts = state.counts();

    let prec0 = T::one() / (prior.s0 * prior.s0);
    let prec_k = T::one() / (prior.sigma * prior.sigma);
    if opts.ignore_likelihood {
        for t in state.theta.iter_mut() {
            *t = draw_atom(prior, rng);
        }
    } else {
        let mut sums = vec![T::zero(); h];
        for (&c, &yi) in state.c.iter().zip(y) {
            sums[c] = sums[c] + yi;
        }
        for hh in 0..h {
            let nh = T::from_usize(counts[hh]).unwrap();
            let var = T::one() / (prec0 + nh * prec_k);
            let mean = var * (prior.m0 * prec0 + sums[hh] * prec_k);
            state.theta[hh] = mean + var.sqrt() * T::sample_standard_normal(rng);
        }
    }

    let mut above = n;
    for hh in 0..h {
        above -= counts[hh];
        let a = T::one() + T::from_usize(counts[hh]).unwrap();
        let b = state.alpha + T::from_usize(above).unwrap();
        state.v[hh] = clamp_stick(T::sample_beta(a, b, rng));
    }

    if let (AlphaPrior::Gamma { shape, rate }, AlphaUpdate::StickConditional) =
        (prior.alpha, opts.alpha_update)
    {
        let log_rem: T = state.v.iter().map(|&v| (-v).ln_1p()).sum();
        state.alpha = T::sample_gamma(shape + T::from_usize(h).unwrap(), rate - log_rem, rng);
    }

    let pi = state.weights();
    let mut umin = T::one();
    for (u, &c) in state.u.iter_mut().zip(&state.c) {
        *u = pi[c] * T::sample_open01(rng);
        umin = umin.min(*u);
    }

    let mut pi = pi;
    let mut rem = state.remainder();
    while rem >= umin {
        if state.v.len() >= opts.max_components {
            return Err(Error::Internal(format!(
                "slice sampler exceeded {} components (alpha = {})",
                opts.max_components, state.alpha
            )));
        }
        let v = clamp_stick(T::sample_beta(T::one(), state.alpha, rng));
        pi.push(v * rem);
        rem = rem * (T::one() - v);
        state.v.push(v);
        state.theta.push(draw_atom(prior, rng));
    }

    let mut logw = Vec::with_capacity(pi.len());
    let mut idx = Vec::with_capacity(pi.len());
    for i in 0..n {
        logw.clear();
        idx.clear();
        let ui = state.u[i];
        for (hh, &p) in pi.iter().enumerate() {
            if p > ui {
                idx.push(hh);
                logw.push(if opts.ignore_likelihood {
                    T::zero()
                } else {
                    let d = y[i] - state.theta[hh];
                    -T::lit(0.5) * d * d * prec_k
                });
            }
        }
        if idx.is_empty() {
            return Err(Error::Internal(format!("empty allocation set for observation {i}")));
        }
        state.c[i] = idx[sample_log_categorical(&mut logw, rng)];
    }

    if let (AlphaPrior::Gamma { shape, rate }, AlphaUpdate::EscobarWest) =
        (prior.alpha, opts.alpha_update)
    {
        state.alpha = escobar_west(state.alpha, shape, rate, n, state.occupied(), rng);
    }
    Ok(())
}

/// Index drawn with probability proportional to `exp(logw)`. Overwrites `logw`.
fn sample_log_categorical<T: Real, R: Rng + ?Sized>(logw: &mut [T], rng: &mut R) -> usize {
    let max = logw.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for w in logw.iter_mut() {
        *w = (*w - max).exp();
        total = total + *w;
    }
    let target = T::sample_open01(rng) * total;
    let mut acc = T::zero();
    for (k, &w) in logw.iter().enumerate() {
        acc = acc + w;
        if target < acc {
            return k;
        }
    }
    logw.len() - 1
}

fn escobar_west<T: Real, R: Rng + ?Sized>(
    alpha: T,
    shape: T,
    rate: T,
    n: usize,
    k: usize,
    rng: &mut R,
) -> T {
    let nf = T::from_usize(n.max(1)).unwrap();
    let kf = T::from_usize(k).unwrap();
    let eta = clamp_stick(T::sample_beta(alpha + T::one(), nf, rng));
    let post_rate = rate - eta.ln();
    let odds = (shape + kf - T::one()) / (nf * post_rate);
    let first = T::sample_open01(rng) < odds / (T::one() + odds);
    let post_shape = if first { shape + kf } else { shape + kf - T::one() };
    T::sample_gamma(post_shape.max(T::epsilon()), post_rate, rng)
}

/// Runs `iters` sweeps from [`SliceState::initial`], storing every post-sweep
/// snapshot.
pub fn run_slice<T: Real>(
    prior: &SlicePrior<T>,
    y: &[T],
    iters: usize,
    burn_in: usize,
    seed: u64,
    opts: &SliceOptions,
) -> Result<ChainOutput<T>> {
    prior.validate()?;
    if iters <= burn_in {
        return Err(Error::InvalidConfig(format!(
            "slice iterations ({iters}) must exceed burn-in ({burn_in})"
        )));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite observation {bad}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SliceState::initial(prior, y);
    let start = Instant::now();
    let mut draws = Vec::with_capacity(iters);
    let mut timestamps = Vec::with_capacity(iters);
    for _ in 0..iters {
        slice_sweep(&mut state, prior, y, opts, &mut rng)?;
        draws.push(state.snapshot());
        timestamps.push(start.elapsed().as_secs_f64());
    }
    Ok(ChainOutput {
        draws,
        wall_seconds: start.elapsed().as_secs_f64(),
        timestamps,
        seed,
        burn_in,
    })
}

/// Maps a snapshot to the fixed-size `(K_out - 1 sticks, K_out atoms)` form.
///
/// Missing components are drawn from the prior. Surplus components are merged
/// into the final weight, which takes the atom of the heaviest of them.
pub fn complete_to_truncation<T: Real, R: Rng + ?Sized>(
    snap: &SliceSnapshot<T>,
    prior: &SlicePrior<T>,
    k_out: usize,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    if k_out < 1 {
        return Err(Error::InvalidConfig("truncation must be at least 1".into()));
    }
    let h = snap.h();
    let mut v: Vec<T> = snap.v.iter().take(k_out - 1).copied().collect();
    let mut theta: Vec<T> = snap.theta.iter().take(k_out).copied().collect();
    while v.len() < k_out - 1 {
        v.push(clamp_stick(T::sample_beta(T::one(), snap.alpha, rng)));
    }
    while theta.len() < k_out {
        theta.push(draw_atom(prior, rng));
    }
    if h > k_out {
        let mut rem = T::one();
        let mut best = (T::neg_infinity(), k_out - 1);
        for (hh, &vh) in snap.v.iter().enumerate() {
            let p = vh * rem;
            rem = rem * (T::one() - vh);
            if hh >= k_out - 1 && p > best.0 {
                best = (p, hh);
            }
        }
        theta[k_out - 1] = snap.theta[best.1];
    }
    Ok((v, theta))
}

/// Draw from the joint prior of labels, atoms, sticks and concentration,
/// with data `y_i ~ N(theta_{c_i}, sigma^2)`. Slices are set consistently.
pub fn simulate_joint<T: Real, R: Rng + ?Sized>(
    prior: &SlicePrior<T>,
    n: usize,
    rng: &mut R,
) -> (SliceState<T>, Vec<T>) {
    let alpha = match prior.alpha {
        AlphaPrior::Fixed { value } => value,
        AlphaPrior::Gamma { shape, rate } => T::sample_gamma(shape, rate, rng),
    };
    let mut state = SliceState {
        c: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        v: Vec::new(),
        theta: Vec::new(),
        alpha,
    };
    let mut pi: Vec<T> = Vec::new();
    let mut rem = T::one();
    for _ in 0..n {
        let target = T::sample_open01(rng);
        let mut acc = T::zero();
        let mut h = 0;
        loop {
            if h == pi.len() {
                let v = clamp_stick(T::sample_beta(T::one(), alpha, rng));
                pi.push(v * rem);
                rem = rem * (T::one() - v);
                state.v.push(v);
                state.theta.push(draw_atom(prior, rng));
            }
            acc = acc + pi[h];
            if target < acc {
                break;
            }
            h += 1;
        }
        state.c.push(h);
        state.u.push(pi[h] * T::sample_open01(rng));
    }
    let y = state
        .c
        .iter()
        .map(|&c| state.theta[c] + prior.sigma * T::sample_standard_normal(rng))
        .collect();
    (state, y)
}

/// Weights of a completed draw, for callers that only hold sticks.
pub fn completed_weights<T: Real>(v: &[T]) -> Vec<T> {
    StickWeights::from_fractions(v).pi
}
