//! End-to-end comparison runs: data, Laplace, skew-Laplace, slice sampler,
//! density ensembles, TV metrics and report artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{self, DatasetName};
use crate::density::{make_grid, posterior_mean_density, DensityEnsemble};
use crate::error::{Error, Result, Stage, StageExt};
use crate::laplace::{fit_laplace, sample_gaussian_with, ModeOptions};
use crate::metrics::{assemble_report, ReportPair};
use crate::model::ModelConfig;
use crate::scenarios::{self, ScenarioSpec};
use crate::skew::{sample_skew_laplace, SkewWeightContext};
use crate::slice::{complete_to_truncation, run_slice, AlphaPrior, AlphaUpdate, SliceOptions, SlicePrior};

/// Sample sizes of the simulation sweep.
pub const SWEEP_SIZES: [usize; 8] = [20, 50, 100, 200, 500, 1000, 1500, 2000];

/// Independent 64-bit seed for a named stage: first 8 bytes (little endian)
/// of `SHA-256(root.to_le_bytes() || label)`.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(root.to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Scenario { id: u8, n: usize },
    Dataset { name: DatasetName },
}

impl DataSource {
    fn is_simulated(&self) -> bool {
        matches!(self, DataSource::Scenario { .. })
    }
}

/// User-facing configuration. `None` fields take the defaults of the data
/// source: simulated data use `K = 20`, kernel sd 1, base measure `N(0, 1)`,
/// `Gamma(3, 3 log n)` concentration prior and a grid padded by 4 kernel sds;
/// real data use `K = 30`, kernel sd 0.5, base measure `N(0, 0.5^2)`,
/// `Gamma(3, 3)` and the unpadded data range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_slice_iters")]
    pub slice_iters: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub kernel_sd: Option<f64>,
    #[serde(default)]
    pub g0_mean: Option<f64>,
    #[serde(default)]
    pub g0_sd: Option<f64>,
    #[serde(default)]
    pub alpha_shape: Option<f64>,
    #[serde(default)]
    pub alpha_rate: Option<f64>,
    #[serde(default)]
    pub pad_sd: Option<f64>,
    #[serde(default)]
    pub restarts: usize,
    #[serde(default)]
    pub alpha_update: AlphaUpdate,
}

fn default_draws() -> usize {
    2000
}
fn default_slice_iters() -> usize {
    10_000
}
fn default_burn_in() -> usize {
    2000
}
fn default_grid_points() -> usize {
    400
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}

impl ExperimentConfig {
    pub fn new(source: DataSource) -> Self {
        ExperimentConfig {
            source,
            k: None,
            draws: default_draws(),
            slice_iters: default_slice_iters(),
            burn_in: default_burn_in(),
            grid_points: default_grid_points(),
            seeds: default_seeds(),
            kernel_sd: None,
            g0_mean: None,
            g0_sd: None,
            alpha_shape: None,
            alpha_rate: None,
            pad_sd: None,
            restarts: 0,
            alpha_update: AlphaUpdate::default(),
        }
    }

    /// One fully specified run per seed. Fails before any work when the
    /// configuration is unusable.
    pub fn resolve(&self) -> Result<Vec<ResolvedRun>> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed list is empty".into()));
        }
        let n = match self.source {
            DataSource::Scenario { id, n } => {
                if !(1..=4).contains(&id) {
                    return Err(Error::InvalidConfig(format!("scenario id must be 1-4, got {id}")));
                }
                if n < 2 {
                    return Err(Error::InvalidConfig(format!("scenario sample size must be at least 2, got {n}")));
                }
                n
            }
            DataSource::Dataset { name } => name.expected_len(),
        };
        let sim = self.source.is_simulated();
        let (shape, rate) = (
            self.alpha_shape.unwrap_or(3.0),
            self.alpha_rate
                .unwrap_or(if sim { 3.0 * (n as f64).ln() } else { 3.0 }),
        );
        let run = ResolvedRun {
            source: self.source,
            n,
            k: self.k.unwrap_or(if sim { 20 } else { 30 }),
            draws: self.draws,
            slice_iters: self.slice_iters,
            burn_in: self.burn_in,
            grid_points: self.grid_points,
            seed: 0,
            kernel_sd: self.kernel_sd.unwrap_or(if sim { 1.0 } else { 0.5 }),
            g0_mean: self.g0_mean.unwrap_or(0.0),
            g0_sd: self.g0_sd.unwrap_or(if sim { 1.0 } else { 0.5 }),
            alpha_shape: shape,
            alpha_rate: rate,
            alpha_fixed: shape / rate,
            pad_sd: self.pad_sd.unwrap_or(if sim { 4.0 } else { 0.0 }),
            restarts: self.restarts,
            alpha_update: self.alpha_update,
        };
        run.validate()?;
        Ok(self.seeds.iter().map(|&seed| ResolvedRun { seed, ..run }).collect())
    }
}

/// Concrete settings of one run, echoed into its report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub source: DataSource,
    pub n: usize,
    pub k: usize,
    pub draws: usize,
    pub slice_iters: usize,
    pub burn_in: usize,
    pub grid_points: usize,
    pub seed: u64,
    pub kernel_sd: f64,
    pub g0_mean: f64,
    pub g0_sd: f64,
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    /// Concentration used by the Laplace target (the prior mean).
    pub alpha_fixed: f64,
    pub pad_sd: f64,
    pub restarts: usize,
    pub alpha_update: AlphaUpdate,
}

impl ResolvedRun {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k < 2 {
            return bad(format!("truncation K must be at least 2, got {}", self.k));
        }
        if self.draws == 0 {
            return bad("number of approximate draws must be positive".into());
        }
        if self.slice_iters <= self.burn_in {
            return bad(format!(
                "slice iterations ({}) must exceed burn-in ({})",
                self.slice_iters, self.burn_in
            ));
        }
        if self.grid_points < 2 {
            return bad(format!("grid needs at least 2 points, got {}", self.grid_points));
        }
        for (name, v) in [
            ("kernel_sd", self.kernel_sd),
            ("g0_sd", self.g0_sd),
            ("alpha_shape", self.alpha_shape),
            ("alpha_rate", self.alpha_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.pad_sd >= 0.0) {
            return bad(format!("pad_sd must be non-negative, got {}", self.pad_sd));
        }
        Ok(())
    }

    /// Directory-safe run name.
    pub fn label(&self) -> String {
        match self.source {
            DataSource::Scenario { id, n } => format!("scenario{id}_n{n}_seed{}", self.seed),
            DataSource::Dataset { name } => format!("{name}_seed{}", self.seed),
        }
    }

    fn dataset_name(&self) -> String {
        match self.source {
            DataSource::Scenario { id, .. } => format!("scenario{id}"),
            DataSource::Dataset { name } => name.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Mode search, covariance and Gaussian sampling.
    pub laplace: f64,
    /// Mode search, covariance, proposals and skew weights.
    pub skew: f64,
    pub slice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMeans {
    pub laplace: Vec<f64>,
    pub skew: Vec<f64>,
    pub slice: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub laplace_opt_iters: usize,
    pub laplace_jitter: f64,
    pub laplace_grad_norm: f64,
    pub skew_kept_fraction: f64,
    pub slice_mean_components: f64,
    pub slice_mean_occupied: f64,
    pub slice_mean_alpha: f64,
}

/// Outcome of one run. Serializes without timings so that identical inputs
/// give byte-identical JSON; timings are written to a separate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub run: ResolvedRun,
    pub grid: Vec<f64>,
    pub truth: Option<Vec<f64>>,
    pub density_mean: DensityMeans,
    pub tv: ReportPair,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub timings: Timings,
}

fn load_data(run: &ResolvedRun) -> Result<(Vec<f64>, Option<scenarios::Scenario<f64>>)> {
    match run.source {
        DataSource::Scenario { id, n } => {
            let spec = ScenarioSpec {
                id,
                n,
                seed: derive_seed(run.seed, "data"),
            };
            let (y, sc) = scenarios::generate(&spec)?;
            Ok((y, Some(sc)))
        }
        DataSource::Dataset { name } => Ok((datasets::load::<f64>(name)?.standardized, None)),
    }
}

/// Runs the three methods on one dataset and compares their density estimates.
pub fn run_experiment(run: &ResolvedRun) -> Result<ExperimentReport> {
    run.validate().stage(Stage::Config)?;
    let (y, scenario) = load_data(run).stage(Stage::Data)?;
    let model = ModelConfig::new(run.k, run.alpha_fixed, run.kernel_sd, run.g0_mean, run.g0_sd)
        .stage(Stage::Config)?;
    let grid = make_grid(&y, run.grid_points, run.pad_sd, run.kernel_sd).stage(Stage::Density)?;

    let mode_opts = ModeOptions {
        restarts: run.restarts,
        ..ModeOptions::default()
    };
    let mut lap_rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, "lap"));
    let start = Instant::now();
    let fit = fit_laplace(&model, &y, &mode_opts, &mut lap_rng).stage(Stage::Laplace)?;
    let fit_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let lap_draws = sample_gaussian_with(&fit, run.draws, &mut lap_rng);
    let lap_secs = fit_secs + start.elapsed().as_secs_f64();

    let start = Instant::now();
    let ctx = SkewWeightContext::for_dpm(&fit, &model, &y).stage(Stage::Skew)?;
    let skew = sample_skew_laplace(&ctx, run.draws, derive_seed(run.seed, "skew"));
    let skew_secs = fit_secs + start.elapsed().as_secs_f64();

    let prior = slice_prior(run);
    let opts = SliceOptions {
        alpha_update: run.alpha_update,
        ..SliceOptions::default()
    };
    let chain = run_slice(
        &prior,
        &y,
        run.slice_iters,
        run.burn_in,
        derive_seed(run.seed, "slice"),
        &opts,
    )
    .stage(Stage::Slice)?;

    let lap_ens = DensityEnsemble::from_unconstrained(&lap_draws, run.kernel_sd, &grid, "laplace")
        .stage(Stage::Density)?;
    let skew_ens = DensityEnsemble::from_unconstrained(&skew.draws, run.kernel_sd, &grid, "skew")
        .stage(Stage::Density)?;
    let mut pad_rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, "slice/complete"));
    let completed = chain
        .kept()
        .iter()
        .map(|s| complete_to_truncation(s, &prior, run.k, &mut pad_rng))
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Density)?;
    let slice_ens = DensityEnsemble::from_sticks(
        completed.iter().map(|(v, t)| (v.as_slice(), t.as_slice())),
        run.kernel_sd,
        &grid,
        "slice",
    )
    .stage(Stage::Density)?;

    let truth = scenario.as_ref().map(|s| s.true_density_on(&grid.points));
    let tv = assemble_report(truth.as_deref(), &lap_ens, &skew_ens, &slice_ens).stage(Stage::Metrics)?;
    let density_mean = DensityMeans {
        laplace: posterior_mean_density(&lap_ens).stage(Stage::Metrics)?,
        skew: posterior_mean_density(&skew_ens).stage(Stage::Metrics)?,
        slice: posterior_mean_density(&slice_ens).stage(Stage::Metrics)?,
    };

    let kept = chain.kept();
    let avg = |f: &dyn Fn(&crate::slice::SliceSnapshot<f64>) -> f64| {
        kept.iter().map(f).sum::<f64>() / kept.len() as f64
    };
    let diagnostics = Diagnostics {
        laplace_opt_iters: fit.opt_iters,
        laplace_jitter: fit.jitter,
        laplace_grad_norm: fit.grad_norm_at_mode,
        skew_kept_fraction: skew.kept_fraction(),
        slice_mean_components: avg(&|s| s.h() as f64),
        slice_mean_occupied: avg(&|s| s.occupied as f64),
        slice_mean_alpha: avg(&|s| s.alpha),
    };

    Ok(ExperimentReport {
        label: run.label(),
        run: *run,
        grid: grid.points,
        truth,
        density_mean,
        tv,
        diagnostics,
        timings: Timings {
            laplace: lap_secs,
            skew: skew_secs,
            slice: chain.wall_seconds,
        },
    })
}

/// Times the three methods without building densities or metrics. Uses the
/// same seeds and timing boundaries as [`run_experiment`].
pub fn time_methods(run: &ResolvedRun) -> Result<Timings> {
    run.validate().stage(Stage::Config)?;
    let (y, _) = load_data(run).stage(Stage::Data)?;
    let model = ModelConfig::new(run.k, run.alpha_fixed, run.kernel_sd, run.g0_mean, run.g0_sd)
        .stage(Stage::Config)?;
    let mode_opts = ModeOptions {
        restarts: run.restarts,
        ..ModeOptions::default()
    };
    let mut lap_rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, "lap"));
    let start = Instant::now();
    let fit = fit_laplace(&model, &y, &mode_opts, &mut lap_rng).stage(Stage::Laplace)?;
    let fit_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let draws = sample_gaussian_with(&fit, run.draws, &mut lap_rng);
    let laplace = fit_secs + start.elapsed().as_secs_f64();
    std::hint::black_box(&draws);
    let start = Instant::now();
    let ctx = SkewWeightContext::for_dpm(&fit, &model, &y).stage(Stage::Skew)?;
    let skew = sample_skew_laplace(&ctx, run.draws, derive_seed(run.seed, "skew"));
    let skew_secs = fit_secs + start.elapsed().as_secs_f64();
    std::hint::black_box(&skew);
    let chain = run_slice(
        &slice_prior(run),
        &y,
        run.slice_iters,
        run.burn_in,
        derive_seed(run.seed, "slice"),
        &SliceOptions {
            alpha_update: run.alpha_update,
            ..SliceOptions::default()
        },
    )
    .stage(Stage::Slice)?;
    Ok(Timings {
        laplace,
        skew: skew_secs,
        slice: chain.wall_seconds,
    })
}

fn slice_prior(run: &ResolvedRun) -> SlicePrior<f64> {
    SlicePrior {
        sigma: run.kernel_sd,
        m0: run.g0_mean,
        s0: run.g0_sd,
        alpha: AlphaPrior::Gamma {
            shape: run.alpha_shape,
            rate: run.alpha_rate,
        },
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub method: String,
    pub time_sec: f64,
    pub tv_truth: Option<f64>,
    pub tv_slice_mean: Option<f64>,
    pub improvement_pct: Option<f64>,
}

impl ExperimentReport {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let row = |method: &str, time_sec, tv_truth, tv_slice_mean, improvement_pct| SummaryRow {
            dataset: self.run.dataset_name(),
            n: self.run.n,
            k: self.run.k,
            seed: self.run.seed,
            method: method.into(),
            time_sec,
            tv_truth,
            tv_slice_mean,
            improvement_pct,
        };
        vec![
            row(
                "laplace",
                self.timings.laplace,
                self.tv.laplace.tv_to_truth,
                Some(self.tv.laplace.tv_to_slice_mean),
                None,
            ),
            row(
                "skew",
                self.timings.skew,
                self.tv.skew.tv_to_truth,
                Some(self.tv.skew.tv_to_slice_mean),
                self.tv.skew.improvement_pct,
            ),
            row("slice", self.timings.slice, self.tv.slice_tv_to_truth, None, None),
        ]
    }
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const POINTWISE_FILE: &str = "pointwise_tv.csv";
pub const DENSITY_FILE: &str = "density_mean.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";

/// Writes all artifacts of a report into `out_dir`. On failure every file
/// written by this call is removed again.
pub fn write_report(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let res = write_all(report, out_dir, &mut written);
    if res.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
    }
    res.map(|_| written).stage(Stage::Output)
}

fn write_all(report: &ExperimentReport, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(SUMMARY_FILE);
    written.push(path.clone());
    let mut w = csv::Writer::from_path(&path)?;
    for row in report.summary_rows() {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(POINTWISE_FILE);
    written.push(path.clone());
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["x", "laplace", "skew"])?;
    for (r, x) in report.grid.iter().enumerate() {
        w.write_record([
            x.to_string(),
            report.tv.laplace.pointwise_tv[r].to_string(),
            report.tv.skew.pointwise_tv[r].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(DENSITY_FILE);
    written.push(path.clone());
    let mut w = csv::Writer::from_path(&path)?;
    let truth = report.truth.as_ref();
    let mut header = vec!["x"];
    if truth.is_some() {
        header.push("truth");
    }
    header.extend(["laplace", "skew", "slice"]);
    w.write_record(&header)?;
    let m = &report.density_mean;
    for (r, x) in report.grid.iter().enumerate() {
        let mut rec = vec![x.to_string()];
        if let Some(t) = truth {
            rec.push(t[r].to_string());
        }
        rec.extend([m.laplace[r], m.skew[r], m.slice[r]].map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(REPORT_FILE);
    written.push(path.clone());
    fs::write(&path, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&path, e))?;

    let path = dir.join(TIMINGS_FILE);
    written.push(path.clone());
    fs::write(&path, serde_json::to_string_pretty(&report.timings)?).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
