//! Simulation scenarios: finite mixtures with Gaussian or Student-t kernels.
//!
//! Scenarios 1 and 3 use four components at (-3, 0, 1.5, 3) with weights from
//! four `Beta(1, 2)` sticks; scenarios 2 and 4 use 100 components with
//! `N(0, 1.5^2)` locations and weights proportional to `h^-2`. Scenarios 1-2
//! use unit-variance normal kernels, 3-4 a location-shifted standard `t_5`.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::normal_pdf;
use crate::error::{Error, Result};
use crate::scalar::Real;

const SCENARIO_1_LOCATIONS: [f64; 4] = [-3.0, 0.0, 1.5, 3.0];
const MANY_COMPONENTS: usize = 100;
const T_DOF: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u8,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// Unit-variance normal.
    Gaussian,
    /// Standard Student-t with 5 degrees of freedom.
    StudentT5,
}

impl KernelFamily {
    pub fn pdf<T: Real>(self, z: T) -> T {
        match self {
            KernelFamily::Gaussian => normal_pdf(z, T::zero(), T::one()),
            KernelFamily::StudentT5 => {
                // Gamma(3) / (sqrt(5 pi) Gamma(5/2)) = 8 / (3 pi sqrt 5)
                let c = T::lit(8.0) / (T::lit(3.0) * T::PI() * T::lit(5.0).sqrt());
                let u = T::one() + z * z / T::lit(T_DOF);
                c / (u * u * u)
            }
        }
    }

    fn sample<T: Real, R: Rng + ?Sized>(self, rng: &mut R) -> T {
        match self {
            KernelFamily::Gaussian => T::sample_standard_normal(rng),
            KernelFamily::StudentT5 => T::sample_student_t(T::lit(T_DOF), rng),
        }
    }
}

/// A realized scenario: weights, locations and kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub id: u8,
    pub seed: u64,
    pub weights: Vec<T>,
    pub locations: Vec<T>,
    pub kernel: KernelFamily,
}

impl<T: Real> Scenario<T> {
    /// Mixture with weights `prod_{l <= h} V_l`, normalized.
    pub fn from_cumulative_sticks(id: u8, seed: u64, v: &[T], locations: Vec<T>) -> Result<Self> {
        let kernel = kernel_for(id)?;
        let mut acc = T::one();
        let raw: Vec<T> = v
            .iter()
            .map(|&x| {
                acc = acc * x;
                acc
            })
            .collect();
        let total: T = raw.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidInput("stick products sum to zero".into()));
        }
        Ok(Scenario {
            id,
            seed,
            weights: raw.into_iter().map(|w| w / total).collect(),
            locations,
            kernel,
        })
    }

    pub fn true_density(&self, x: T) -> T {
        self.weights
            .iter()
            .zip(&self.locations)
            .map(|(&p, &m)| p * self.kernel.pdf(x - m))
            .sum()
    }

    pub fn true_density_on(&self, xs: &[T]) -> Vec<T> {
        xs.iter().map(|&x| self.true_density(x)).collect()
    }

    pub fn mean(&self) -> T {
        self.weights.iter().zip(&self.locations).map(|(&p, &m)| p * m).sum()
    }

    /// `n` draws: component by inverse CDF, then location plus kernel noise.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        let mut cdf = Vec::with_capacity(self.weights.len());
        let mut acc = T::zero();
        for &w in &self.weights {
            acc = acc + w;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = T::sample_open01(rng) * acc;
                let h = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                self.locations[h] + self.kernel.sample::<T, R>(rng)
            })
            .collect()
    }
}

fn kernel_for(id: u8) -> Result<KernelFamily> {
    match id {
        1 | 2 => Ok(KernelFamily::Gaussian),
        3 | 4 => Ok(KernelFamily::StudentT5),
        _ => Err(Error::InvalidConfig(format!("scenario id must be 1-4, got {id}"))),
    }
}

/// Weights proportional to `h^-2`, `h = 1..=m`.
pub fn inverse_square_weights<T: Real>(m: usize) -> Vec<T> {
    let raw: Vec<T> = (1..=m).map(|h| T::one() / T::from_usize(h * h).unwrap()).collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Realizes the scenario parameters and draws `spec.n` observations, all from
/// one seeded stream.
pub fn generate<T: Real>(spec: &ScenarioSpec) -> Result<(Vec<T>, Scenario<T>)> {
    if spec.n == 0 {
        return Err(Error::InvalidConfig("scenario sample size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scenario = match spec.id {
        1 | 3 => {
            let v: Vec<T> = (0..4)
                .map(|_| T::sample_beta(T::one(), T::lit(2.0), &mut rng))
                .collect();
            let locs = SCENARIO_1_LOCATIONS.iter().map(|&m| T::lit(m)).collect();
            Scenario::from_cumulative_sticks(spec.id, spec.seed, &v, locs)?
        }
        2 | 4 => {
            let locations = (0..MANY_COMPONENTS)
                .map(|_| T::lit(1.5) * T::sample_standard_normal(&mut rng))
                .collect();
            Scenario {
                id: spec.id,
                seed: spec.seed,
                weights: inverse_square_weights(MANY_COMPONENTS),
                locations,
                kernel: kernel_for(spec.id)?,
            }
        }
        other => return Err(Error::InvalidConfig(format!("scenario id must be 1-4, got {other}"))),
    };
    let y = scenario.sample(spec.n, &mut rng);
    Ok((y, scenario))
}

/// Writes `y` as a one-column CSV plus a JSON sidecar with the scenario.
pub fn write_dataset<T: Real + Serialize>(
    y: &[T],
    scenario: &Scenario<T>,
    csv_path: &Path,
    json_path: &Path,
) -> Result<()> {
    let mut f = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut body = String::from("y\n");
    for v in y {
        body.push_str(&format!("{v}\n"));
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(csv_path, e))?;
    let json = serde_json::to_string_pretty(scenario)?;
    std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))?;
    Ok(())
}
