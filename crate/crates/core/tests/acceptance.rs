//! Acceptance suite. Runs every criterion in sequence (timings must not share
//! the CPU with other tests), prints one PASS/FAIL line each, and exits
//! nonzero if any failed.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use dpm_laplace::experiment::{time_methods, DENSITY_FILE, POINTWISE_FILE, SUMMARY_FILE};
use dpm_laplace::laplace::gaussian_from_target;
use dpm_laplace::stats::ks_statistic;
use dpm_laplace::target::IsotropicGaussianTarget;
use dpm_laplace::{
    grid_tv, load_dataset, run_experiment, sample_gaussian, sample_skew_laplace, write_report,
    AlphaUpdate, DataSource, DatasetName, ExperimentConfig, ExperimentReport, Grid,
    SkewWeightContext,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Result<Outcome, String>;

fn scenario_run(id: u8, n: usize, seed: u64) -> Result<ExperimentReport, String> {
    let mut cfg = ExperimentConfig::new(DataSource::Scenario { id, n });
    cfg.seeds = vec![seed];
    let run = cfg.resolve().map_err(|e| e.to_string())?.remove(0);
    run_experiment(&run).map_err(|e| e.to_string())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn derivatives() -> Result<Outcome, String> {
    let start = Instant::now();
    let e = common::derivative_check(20, 7);
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        e.max_grad_rel < 1e-5 && e.max_hess_rel < 1e-4 && secs < 30.0,
        format!(
            "{} instances, max rel err gradient {:.2e} (< 1e-5), Hessian {:.2e} (< 1e-4), {secs:.2}s (< 30s)",
            e.instances, e.max_grad_rel, e.max_hess_rel
        ),
    ))
}

fn grid_tv_oracle() -> Result<Outcome, String> {
    let g = Grid::new(-8.0, 9.0, 4000).map_err(|e| e.to_string())?;
    let pdf = |x: f64, m: f64| (-0.5 * (x - m).powi(2)).exp() / std::f64::consts::TAU.sqrt();
    let f: Vec<f64> = g.points.iter().map(|&x| pdf(x, 0.0)).collect();
    let h: Vec<f64> = g.points.iter().map(|&x| pdf(x, 1.0)).collect();
    let tv = grid_tv(&f, &h, g.dx).map_err(|e| e.to_string())?;
    Ok(outcome(
        (tv - 0.38292).abs() <= 1e-3,
        format!("TV(N(0,1), N(1,1)) = {tv:.5}, expected 0.38292 +- 0.001"),
    ))
}

fn skew_exactness() -> Result<Outcome, String> {
    let tv = common::skew_histogram_tv(10_000, 20, 11);
    Ok(outcome(
        tv < 0.03,
        format!("histogram TV of 10000 draws vs quadrature density = {tv:.4} (< 0.03)"),
    ))
}

fn symmetric_degeneracy() -> Result<Outcome, String> {
    let target = IsotropicGaussianTarget {
        center: vec![0.5, -1.0, 2.0],
        scale: 0.7,
    };
    let fit = gaussian_from_target(&target, &target.center).map_err(|e| e.to_string())?;
    let ctx = SkewWeightContext::new(&fit, &target).map_err(|e| e.to_string())?;
    let skew = sample_skew_laplace(&ctx, 2000, 21);
    let lap = sample_gaussian(&fit, 2000, 22);
    let ks: Vec<f64> = (0..3)
        .map(|j| ks_statistic(&skew.draws.column(j), &lap.column(j)))
        .collect();
    let worst = ks.iter().copied().fold(0.0, f64::max);
    Ok(outcome(
        worst < 0.05,
        format!("per-coordinate KS at N=2000: {ks:.4?} (< 0.05)"),
    ))
}

fn slice_validity() -> Result<Outcome, String> {
    let alpha = 2.0;
    let ev1 = common::prior_reproduction(alpha, 10, 20_000, 31)?;
    let target = 1.0 / (1.0 + alpha);
    let prior_ok = (ev1 - target).abs() < 0.02;
    let stats = common::geweke(AlphaUpdate::StickConditional, 5, 200_000, 32)?;
    let geweke_ok = stats.iter().all(|s| s.z().abs() < 3.0);
    let zs: Vec<String> = stats.iter().map(|s| format!("{} z={:+.2}", s.name, s.z())).collect();
    Ok(outcome(
        prior_ok && geweke_ok,
        format!(
            "(a) E[V1] = {ev1:.4} vs {target:.4} (+-0.02); (b) Geweke n=5: {} (|z| < 3); (c) invariants held on every sweep",
            zs.join(", ")
        ),
    ))
}

fn density_normalization() -> Result<Outcome, String> {
    let r = scenario_run(1, 100, 1)?;
    let dx = r.grid[1] - r.grid[0];
    let integral = |f: &[f64]| f.iter().sum::<f64>() * dx;
    let m = &r.density_mean;
    let totals = [integral(&m.laplace), integral(&m.skew), integral(&m.slice)];
    Ok(outcome(
        totals.iter().all(|t| (t - 1.0).abs() <= 0.01),
        format!(
            "integrals laplace {:.5}, skew {:.5}, slice {:.5} (1 +- 0.01)",
            totals[0], totals[1], totals[2]
        ),
    ))
}

fn directional_improvement() -> Result<Outcome, String> {
    let (mut better_mean, mut better_pointwise) = (0, 0);
    let mut rows = Vec::new();
    for seed in 1..=5 {
        let r = scenario_run(2, 200, seed)?;
        let (lap, skew) = (&r.tv.laplace, &r.tv.skew);
        let (ml, ms) = (median(lap.pointwise_tv.clone()), median(skew.pointwise_tv.clone()));
        better_mean += usize::from(skew.tv_to_slice_mean < lap.tv_to_slice_mean);
        better_pointwise += usize::from(ms < ml);
        rows.push(format!(
            "seed {seed}: {:.4}/{:.4} median pw {ml:.3}/{ms:.3}",
            lap.tv_to_slice_mean, skew.tv_to_slice_mean
        ));
    }
    Ok(outcome(
        better_mean >= 4 && better_pointwise >= 4,
        format!(
            "skew better on mean-density TV in {better_mean}/5, on median pointwise TV in {better_pointwise}/5 (>= 4 each); lap/skew {}",
            rows.join("; ")
        ),
    ))
}

fn truth_recovery() -> Result<Outcome, String> {
    let r = scenario_run(1, 100, 1)?;
    let tv = [
        r.tv.laplace.tv_to_truth,
        r.tv.skew.tv_to_truth,
        r.tv.slice_tv_to_truth,
    ];
    let tv: Vec<f64> = tv.iter().map(|t| t.ok_or("missing truth TV")).collect::<Result<_, _>>()?;
    Ok(outcome(
        tv.iter().all(|&t| t < 0.15),
        format!(
            "tv_to_truth laplace {:.4}, skew {:.4}, slice {:.4} (< 0.15)",
            tv[0], tv[1], tv[2]
        ),
    ))
}

fn timing_ordering() -> Result<Outcome, String> {
    let mut cfg = ExperimentConfig::new(DataSource::Scenario { id: 1, n: 1000 });
    cfg.seeds = vec![1];
    let run = cfg.resolve().map_err(|e| e.to_string())?.remove(0);
    let mut lap = Vec::new();
    let mut skew = Vec::new();
    let mut slice = Vec::new();
    for _ in 0..3 {
        let t = time_methods(&run).map_err(|e| e.to_string())?;
        lap.push(t.laplace);
        skew.push(t.skew);
        slice.push(t.slice);
    }
    let (l, s, c) = (median(lap), median(skew), median(slice));
    Ok(outcome(
        l < s && s < c && c / l > 5.0,
        format!(
            "median of 3: laplace {l:.3}s, skew {s:.3}s, slice {c:.3}s; need lap < skew < slice and slice/lap = {:.1} > 5",
            c / l
        ),
    ))
}

fn real_data() -> Result<Outcome, String> {
    let mut sizes = Vec::new();
    for name in DatasetName::ALL {
        let d = load_dataset::<f64>(name).map_err(|e| e.to_string())?;
        sizes.push(d.n());
    }
    let sizes_ok = sizes == [272, 82, 150, 48];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(DataSource::Dataset {
        name: DatasetName::Rock,
    });
    cfg.seeds = vec![1];
    let run = cfg.resolve().map_err(|e| e.to_string())?.remove(0);
    let report = run_experiment(&run).map_err(|e| e.to_string())?;
    let out = dir.path().join(&report.label);
    write_report(&report, &out).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let files_ok = [SUMMARY_FILE, POINTWISE_FILE, DENSITY_FILE]
        .iter()
        .all(|f| out.join(f).is_file());
    Ok(outcome(
        sizes_ok && files_ok && secs < 60.0 && run.k == 30,
        format!(
            "sizes {sizes:?} (272, 82, 150, 48); rock K={} run {secs:.2}s (< 60s), CSV artifacts present: {files_ok}",
            run.k
        ),
    ))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("derivative correctness", derivatives),
        ("grid TV oracle", grid_tv_oracle),
        ("skew sampler exactness (1-D)", skew_exactness),
        ("symmetric target degeneracy", symmetric_degeneracy),
        ("slice sampler validity", slice_validity),
        ("density normalization", density_normalization),
        ("directional improvement, scenario 2 n=200", directional_improvement),
        ("truth recovery, scenario 1 n=100", truth_recovery),
        ("timing ordering, scenario 1 n=1000", timing_ordering),
        ("real-data pipeline", real_data),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
