//! Laplace and skew-Laplace approximations for truncated Dirichlet process
//! mixtures of normals, with a slice-sampling reference and a harness that
//! compares the three on simulated and real data.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod datasets;
pub mod density;
pub mod error;
pub mod experiment;
pub mod laplace;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod scenarios;
pub mod skew;
pub mod slice;
pub mod stats;
pub mod target;

pub use error::{Error, Result, Stage};
pub use scalar::Real;

pub use datasets::{load as load_dataset, DatasetName, RealDataset};
pub use density::{make_grid, ordinates, posterior_mean_density, DensityEnsemble, Grid};
pub use experiment::{
    run_experiment, write_report, DataSource, ExperimentConfig, ExperimentReport, ResolvedRun,
};
pub use laplace::{fit_laplace, sample_gaussian, LaplaceFit, ModeOptions};
pub use linalg::Matrix;
pub use metrics::{assemble_report, grid_tv, pointwise_empirical_tv, ReportPair, TVReport};
pub use model::{
    gradient, hessian, log_unnorm_posterior, stick_transform, DpmPosterior, ModelConfig,
    StickWeights, UnconstrainedParams,
};
pub use scenarios::{generate as generate_scenario, Scenario, ScenarioSpec};
pub use skew::{sample_skew_laplace, SkewDraws, SkewWeightContext};
pub use slice::{
    complete_to_truncation, run_slice, slice_sweep, AlphaPrior, AlphaUpdate, ChainOutput,
    SliceOptions, SlicePrior, SliceState,
};
pub use target::LogTarget;

pub type Config64 = ModelConfig<f64>;
pub type Params64 = UnconstrainedParams<f64>;
pub type Fit64 = LaplaceFit<f64>;
pub type Grid64 = Grid<f64>;
pub type Ensemble64 = DensityEnsemble<f64>;
pub type SlicePrior64 = SlicePrior<f64>;
pub type Chain64 = ChainOutput<f64>;
pub type Matrix64 = Matrix<f64>;
