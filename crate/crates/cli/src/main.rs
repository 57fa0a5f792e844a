//! `dpmlap`: run Laplace / skew-Laplace / slice-sampler comparisons.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dpm_laplace::experiment::{time_methods, SWEEP_SIZES};
use dpm_laplace::{
    run_experiment, write_report, DataSource, DatasetName, Error, ExperimentConfig, ResolvedRun,
};
use rayon::prelude::*;
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "dpmlap", version, about = "Laplace vs skew-Laplace vs slice sampling for DP mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One data source, one or more seeds.
    Run(Opts),
    /// Scenario sweep over sample sizes (all four scenarios unless --scenario is given).
    Simulate(Opts),
    /// The four bundled real datasets (or the one given by --dataset).
    Real(Opts),
    /// Timings only, no densities or metrics.
    Bench(Opts),
}

/// Flags; every one may also be given in the JSON file passed to --config.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Opts {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Simulation scenario 1-4.
    #[arg(long, conflicts_with = "dataset")]
    scenario: Option<u8>,
    /// Real dataset: faithful, galaxies, iris or rock.
    #[arg(long)]
    dataset: Option<String>,
    /// Sample size for simulated data (sweep sizes for `simulate` when omitted).
    #[arg(long)]
    n: Option<usize>,
    /// Root seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated root seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Truncation level of the Laplace approximations.
    #[arg(long = "K")]
    #[serde(rename = "K", alias = "k")]
    k: Option<usize>,
    /// Approximate posterior draws per method.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    slice_iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Output directory; each run writes into its own subdirectory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent runs.
    #[arg(long)]
    workers: Option<usize>,
    /// Additional jittered starts for the mode search.
    #[arg(long)]
    restarts: Option<usize>,
}

impl Opts {
    /// Flags over file over defaults.
    fn merged(self) -> anyhow::Result<Opts> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: Opts = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(Opts {
            config: Some(path),
            scenario: self.scenario.or(file.scenario),
            dataset: self.dataset.or(file.dataset),
            n: self.n.or(file.n),
            seed: self.seed.or(file.seed),
            seeds: self.seeds.or(file.seeds),
            k: self.k.or(file.k),
            draws: self.draws.or(file.draws),
            slice_iters: self.slice_iters.or(file.slice_iters),
            burn_in: self.burn_in.or(file.burn_in),
            grid_points: self.grid_points.or(file.grid_points),
            out: self.out.or(file.out),
            workers: self.workers.or(file.workers),
            restarts: self.restarts.or(file.restarts),
        })
    }

    fn seeds(&self) -> Vec<u64> {
        match (&self.seeds, self.seed) {
            (Some(s), _) => s.clone(),
            (None, Some(s)) => vec![s],
            (None, None) => vec![1],
        }
    }

    fn config_for(&self, source: DataSource) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(source);
        c.k = self.k;
        c.seeds = self.seeds();
        if let Some(v) = self.draws {
            c.draws = v;
        }
        if let Some(v) = self.slice_iters {
            c.slice_iters = v;
        }
        if let Some(v) = self.burn_in {
            c.burn_in = v;
        }
        if let Some(v) = self.grid_points {
            c.grid_points = v;
        }
        c.restarts = self.restarts.unwrap_or(0);
        c
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    fn dataset(&self) -> anyhow::Result<Option<DatasetName>> {
        self.dataset
            .as_deref()
            .map(DatasetName::parse)
            .transpose()
            .map_err(Into::into)
    }
}

fn plan(command: &Command) -> anyhow::Result<(Vec<ResolvedRun>, &Opts)> {
    let (opts, sources): (&Opts, Vec<DataSource>) = match command {
        Command::Run(o) => {
            let src = match (o.scenario, o.dataset()?) {
                (Some(id), None) => DataSource::Scenario {
                    id,
                    n: o.n.context("--n is required with --scenario")?,
                },
                (None, Some(name)) => DataSource::Dataset { name },
                _ => bail!("give exactly one of --scenario or --dataset"),
            };
            (o, vec![src])
        }
        Command::Simulate(o) | Command::Bench(o) => {
            if o.dataset.is_some() {
                bail!("--dataset is not valid for this subcommand");
            }
            let ids: Vec<u8> = o.scenario.map_or_else(|| vec![1, 2, 3, 4], |s| vec![s]);
            let sizes: Vec<usize> = o.n.map_or_else(|| SWEEP_SIZES.to_vec(), |n| vec![n]);
            let srcs = ids
                .iter()
                .flat_map(|&id| sizes.iter().map(move |&n| DataSource::Scenario { id, n }))
                .collect();
            (o, srcs)
        }
        Command::Real(o) => {
            if o.scenario.is_some() {
                bail!("--scenario is not valid for `real`");
            }
            let names = o.dataset()?.map_or_else(|| DatasetName::ALL.to_vec(), |d| vec![d]);
            (o, names.into_iter().map(|name| DataSource::Dataset { name }).collect())
        }
    };
    let mut runs = Vec::new();
    for src in sources {
        runs.extend(opts.config_for(src).resolve()?);
    }
    Ok((runs, opts))
}

fn execute(run: &ResolvedRun, out: &Path, bench: bool) -> Result<String, Error> {
    if bench {
        let t = time_methods(run)?;
        return Ok(format!(
            "{}: time_sec laplace={:.4} skew={:.4} slice={:.4}",
            run.label(),
            t.laplace,
            t.skew,
            t.slice
        ));
    }
    let report = run_experiment(run)?;
    write_report(&report, &out.join(&report.label))?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    Ok(format!(
        "{}: tv_slice_mean laplace={:.4} skew={:.4} improvement={}% | tv_truth laplace={} skew={} slice={} | time_sec laplace={:.3} skew={:.3} slice={:.3}",
        report.label,
        report.tv.laplace.tv_to_slice_mean,
        report.tv.skew.tv_to_slice_mean,
        report.tv.skew.improvement_pct.map_or_else(|| "-".into(), |p| format!("{p:.1}")),
        fmt(report.tv.laplace.tv_to_truth),
        fmt(report.tv.skew.tv_to_truth),
        fmt(report.tv.slice_tv_to_truth),
        report.timings.laplace,
        report.timings.skew,
        report.timings.slice,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Command::Run(o) => o.merged().map(Command::Run),
        Command::Simulate(o) => o.merged().map(Command::Simulate),
        Command::Real(o) => o.merged().map(Command::Real),
        Command::Bench(o) => o.merged().map(Command::Bench),
    };
    let planned = command.and_then(|c| {
        let (runs, opts) = plan(&c)?;
        Ok((runs, opts.out_dir(), opts.workers, matches!(c, Command::Bench(_))))
    });
    let (runs, out, workers, bench) = match planned {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error [config]: {e:#}");
            return ExitCode::from(2);
        }
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(1).max(1))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error [config]: {e}");
            return ExitCode::from(2);
        }
    };
    let results: Vec<Result<String, Error>> =
        pool.install(|| runs.par_iter().map(|r| execute(r, &out, bench)).collect());

    let mut code = 0u8;
    for (run, res) in runs.iter().zip(results) {
        match res {
            Ok(line) => println!("{line}"),
            Err(e) => {
                eprintln!("error in {}: {e}", run.label());
                if code == 0 {
                    code = e.stage().map_or(1, |s| s.exit_code() as u8);
                }
            }
        }
    }
    ExitCode::from(code)
}
