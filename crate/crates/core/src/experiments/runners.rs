use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::{fit_rate, fit_window_start, run_metrics_selftest, DataFile, Experiment, ExperimentConfig, ExperimentError, Report};
use crate::dynamics::{simulate, write_trajectory_csv};
use crate::euler1d::{euler_vs_particles, write_comparison_csv, EulerCompareParams, EulerState1D};
use crate::meanfield::{chaos_experiment, sample_iid, write_chaos_csv, ChaosParams, InitialDatum, Marginal};
use crate::measures::{
    fournier_rate, wasserstein1_1d, wasserstein1_assignment, EmpiricalMeasure, GridDensity1D, RateReport,
};
use crate::seeding::{derive_seed, stream_rng};

/// Runs the configured experiment and assembles its report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let start = Instant::now();
    let mut report = match config.experiment {
        Experiment::Simulate => run_simulate(config),
        Experiment::Fournier => run_fournier(config),
        Experiment::Chaos => run_chaos(config),
        Experiment::EulerCompare => run_euler_compare(config),
        Experiment::MetricsSelftest => run_metrics_selftest(config),
    }?;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

pub(super) fn csv_file<I>(name: &str, header: &[&str], rows: I) -> Result<DataFile, ExperimentError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| ExperimentError::io(&PathBuf::from(name), e.into());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let contents = w.into_inner().map_err(|e| ExperimentError::io(&PathBuf::from(name), e.into_error()))?;
    Ok(DataFile { name: name.to_string(), contents })
}

fn stream_file<F>(name: &str, write: F) -> Result<DataFile, ExperimentError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut contents = Vec::new();
    write(&mut contents).map_err(|e| ExperimentError::io(&PathBuf::from(name), e))?;
    Ok(DataFile { name: name.to_string(), contents })
}

fn report(config: &ExperimentConfig, files: Vec<DataFile>, results: serde_json::Value, halt: Option<String>) -> Report {
    Report { config: config.clone(), files, results, halt, wall_clock_seconds: 0.0 }
}

fn required<T: Copy>(v: Option<T>, name: &str) -> Result<T, ExperimentError> {
    v.ok_or_else(|| ExperimentError::Validation(vec![format!("{name}: missing")]))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; NaN for fewer than two values.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Log-log fit of `ys` against `ns` over the standard window, as a JSON record.
fn log_log_fit(ns: &[usize], ys: &[f64]) -> serde_json::Value {
    let first = fit_window_start(ns.len());
    let window = json!({
        "first_index": first,
        "rule": "the smallest N is excluded when n_list has at least 5 entries",
    });
    let (ns, ys) = (&ns[first..], &ys[first..]);
    if let Some(y) = ys.iter().find(|y| !(**y > 0.0)) {
        return json!({ "window": window, "fit": null, "error": format!("non-positive value {y} cannot be fitted on a log scale") });
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    match fit_rate(&xs, &ly) {
        Ok(f) => json!({ "window": window, "fit": f, "error": null }),
        Err(e) => json!({ "window": window, "fit": null, "error": e.to_string() }),
    }
}

fn fmt_row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

pub fn run_simulate(config: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let datum = required(config.initial, "initial")?;
    let kernel = required(config.kernel, "kernel")?;
    let n = *config.n_list.first().ok_or_else(|| ExperimentError::invalid("n_list: missing or empty"))?;
    let z0 = sample_iid(&datum, n, derive_seed(config.rng_seed, 0, 0))?;
    let sim = simulate(&z0, &kernel, required(config.dt, "dt")?, required(config.t_final, "t_final")?, config.observer_stride)?;
    let trajectory = stream_file("trajectory.csv", |buf| {
        write_trajectory_csv(&sim.frames, buf).map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    let s = &sim.summary;
    let summary = csv_file(
        "support.csv",
        &["t", "max_speed", "max_radius"],
        (0..s.t.len()).map(|k| fmt_row(&[s.t[k], s.max_speed[k], s.max_radius[k]])),
    )?;
    let results = json!({ "n": n, "dim": z0.dim(), "summary": sim.summary });
    Ok(report(config, vec![trajectory, summary], results, None))
}

fn fournier_marginal(datum: &InitialDatum) -> (usize, Marginal) {
    match *datum {
        InitialDatum::Product { dim, position, .. } => (dim, position),
        InitialDatum::Monokinetic { density, .. } => (1, density),
    }
}

/// Monte Carlo `E W1(rho, mu_N)` per `N`: exact against the density in 1D,
/// assignment against a fresh reference sample of size `N` in 2D. Each
/// `(N, trial)` cell draws from seed slot `(trial, n_index)`.
pub fn run_fournier(config: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let (dim, marginal) = fournier_marginal(&required(config.initial, "initial")?);
    if !(1..=2).contains(&dim) {
        return Err(ExperimentError::invalid(format!("initial: fournier supports dimensions 1 and 2, got {dim}")));
    }
    let rho = match marginal {
        Marginal::Uniform { lo, hi } => GridDensity1D::uniform(lo, hi)?,
        Marginal::RaisedCosine { lo, hi } => marginal.to_grid(lo, hi, config.grid_cells)?,
    };
    let cells: Vec<(usize, usize, usize)> = config
        .n_list
        .iter()
        .enumerate()
        .flat_map(|(ni, &n)| (0..config.trials).map(move |t| (ni, n, t)))
        .collect();
    let w1: Vec<f64> = cells
        .par_iter()
        .map(|&(ni, n, trial)| -> Result<f64, ExperimentError> {
            let seed = derive_seed(config.rng_seed, trial as u64, ni as u64);
            let mut rng = stream_rng(seed, 0);
            if dim == 1 {
                let pts: Vec<f64> = (0..n).map(|_| rho.sample(&mut rng)).collect();
                Ok(wasserstein1_1d(&EmpiricalMeasure::uniform(1, pts)?, &rho)?)
            } else {
                let mut reference = stream_rng(seed, 1);
                let a: Vec<f64> = (0..2 * n).map(|_| marginal.sample(&mut rng)).collect();
                let b: Vec<f64> = (0..2 * n).map(|_| marginal.sample(&mut reference)).collect();
                Ok(wasserstein1_assignment(&EmpiricalMeasure::uniform(2, a)?, &EmpiricalMeasure::uniform(2, b)?)?)
            }
        })
        .collect::<Result<_, _>>()?;

    let per_n: Vec<&[f64]> = w1.chunks(config.trials).collect();
    let means: Vec<f64> = per_n.iter().map(|c| mean(c)).collect();
    let std_errors: Vec<f64> = per_n.iter().map(|c| std_dev(c) / (c.len() as f64).sqrt()).collect();
    let c_d: Vec<f64> = config.n_list.iter().map(|&n| fournier_rate(n, dim)).collect::<Result<_, _>>()?;
    let fit = log_log_fit(&config.n_list, &means);
    let rate_report = fit["fit"].as_object().map(|f| {
        let first = fit_window_start(config.n_list.len());
        RateReport {
            n_values: config.n_list[first..].to_vec(),
            mean_errors: means[first..].to_vec(),
            fitted_slope: f["slope"].as_f64().unwrap_or(f64::NAN),
            fitted_intercept: f["intercept"].as_f64().unwrap_or(f64::NAN),
            r_squared: f["r_squared"].as_f64().unwrap_or(f64::NAN),
        }
    });

    let trials_csv = csv_file(
        "fournier_trials.csv",
        &["N", "trial", "w1"],
        cells.iter().zip(&w1).map(|(&(_, n, t), w)| vec![n.to_string(), t.to_string(), w.to_string()]),
    )?;
    let summary_csv = csv_file(
        "fournier_summary.csv",
        &["N", "mean_w1", "std_error", "c_d"],
        (0..means.len()).map(|k| {
            let mut row = vec![config.n_list[k].to_string()];
            row.extend(fmt_row(&[means[k], std_errors[k], c_d[k]]));
            row
        }),
    )?;
    let results = json!({
        "dim": dim,
        "n_values": config.n_list,
        "mean_w1": means,
        "std_error": std_errors,
        "c_d": c_d,
        "variance_available": config.trials > 1,
        "rate_fit": fit,
        "rate_report": rate_report,
    });
    Ok(report(config, vec![trials_csv, summary_csv], results, None))
}

/// Coupled-particle deviation per `N`, with a rate fit of the final mean and
/// median deviation against `N` and the comparison curve `sqrt(C_d(N))`.
pub fn run_chaos(config: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let f0 = required(config.initial, "initial")?;
    let params = ChaosParams {
        n_list: config.n_list.clone(),
        m_ref: required(config.m_ref, "m_ref")?,
        trials: config.trials,
        f0,
        kernel: required(config.kernel, "kernel")?,
        dt: required(config.dt, "dt")?,
        t_final: required(config.t_final, "t_final")?,
        rng_seed: config.rng_seed,
        max_work: config.max_work,
    };
    let runs = chaos_experiment(&params)?;
    let dim = f0.dim();

    let finals: Vec<Vec<f64>> =
        runs.iter().map(|r| r.per_trial.iter().map(|s| *s.mean_dev.last().unwrap()).collect()).collect();
    let final_mean: Vec<f64> = runs.iter().map(|r| *r.d_n_estimate.last().unwrap()).collect();
    let final_median: Vec<f64> = runs.iter().map(|r| r.final_median).collect();
    let final_std: Vec<f64> = finals.iter().map(|f| std_dev(f)).collect();
    let sqrt_c_d: Vec<f64> =
        config.n_list.iter().map(|&n| fournier_rate(n.max(2), dim).map(f64::sqrt)).collect::<Result<_, _>>()?;

    let trials_csv = stream_file("chaos_trials.csv", |buf| write_chaos_csv(&runs, buf))?;
    let curves_csv = csv_file(
        "chaos_curves.csv",
        &["N", "t", "mean_dev", "max_dev"],
        runs.iter().flat_map(|r| {
            (0..r.times.len()).map(move |k| {
                let mut row = vec![r.n.to_string()];
                row.extend(fmt_row(&[r.times[k], r.d_n_estimate[k], r.delta_estimate[k]]));
                row
            })
        }),
    )?;
    let w1_csv = csv_file(
        "chaos_w1.csv",
        &["N", "t", "w1_phase"],
        runs.iter().flat_map(|r| {
            (0..r.w1_times.len()).map(move |k| vec![r.n.to_string(), r.w1_times[k].to_string(), r.w1_marginal[k].to_string()])
        }),
    )?;
    let final_csv = csv_file(
        "chaos_final.csv",
        &["N", "mean_dev", "median_dev", "std_dev", "w1_phase", "pair_covariance", "sqrt_c_d"],
        runs.iter().enumerate().map(|(j, r)| {
            let mut row = vec![r.n.to_string()];
            row.extend(fmt_row(&[
                final_mean[j],
                final_median[j],
                final_std[j],
                *r.w1_marginal.last().unwrap(),
                r.pair_covariance,
                sqrt_c_d[j],
            ]));
            row
        }),
    )?;
    let trials = runs.first().map_or(config.trials, |r| r.trials);
    // The frozen reference stands in for the continuum flow; its own sampling
    // error sets a floor that D_N cannot resolve below.
    let reference_bias_scale = fournier_rate(params.m_ref.max(2), dim)?.sqrt();
    let results = json!({
        "n_values": config.n_list,
        "m_ref": params.m_ref,
        "reference_bias_scale": reference_bias_scale,
        "trials": trials,
        "truncated": runs.first().is_some_and(|r| r.truncated),
        "variance_available": trials > 1,
        "final_mean_dev": final_mean,
        "final_median_dev": final_median,
        "final_std_dev": final_std,
        "sqrt_c_d": sqrt_c_d,
        "pair_covariance": runs.iter().map(|r| r.pair_covariance).collect::<Vec<_>>(),
        "fit_mean": log_log_fit(&config.n_list, &final_mean),
        "fit_median": log_log_fit(&config.n_list, &final_median),
        "runs": runs,
    });
    Ok(report(config, vec![trials_csv, curves_csv, w1_csv, final_csv], results, None))
}

/// Grid domain for the fluid solve: the configured one, or the initial
/// support padded by a tenth of its width on each side.
fn euler_domain(config: &ExperimentConfig, density: &Marginal) -> (f64, f64) {
    match config.domain {
        Some([lo, hi]) => (lo, hi),
        None => {
            let (lo, hi) = density.bounds();
            let pad = 0.1 * (hi - lo);
            (lo - pad, hi + pad)
        }
    }
}

/// Particles against the Euler solution on the `(epsilon, N, t)` grid. A
/// shock halt still produces the truncated report; the halt is recorded.
pub fn run_euler_compare(config: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let (density, u0) = match required(config.initial, "initial")? {
        InitialDatum::Monokinetic { density, velocity, .. } => (density, velocity),
        _ => return Err(ExperimentError::invalid("initial: euler-compare needs a monokinetic datum")),
    };
    let (x_min, x_max) = euler_domain(config, &density);
    let params = EulerCompareParams {
        density,
        u0,
        kernel: required(config.kernel, "kernel")?,
        x_min,
        x_max,
        grid_cells: config.grid_cells,
        eps_list: config.epsilon_list.clone(),
        n_list: config.n_list.clone(),
        t_final: required(config.t_final, "t_final")?,
        dt: required(config.dt, "dt")?,
        checkpoint_stride: config.checkpoint_stride,
        cfl: config.cfl,
        trials: config.trials,
        rng_seed: config.rng_seed,
        observable: config.observable,
    };
    let cmp = euler_vs_particles(&params)?;

    let rows_csv = stream_file("comparison.csv", |buf| write_comparison_csv(&cmp.rows, buf))?;
    let states_csv = stream_file("euler_states.csv", |buf| EulerState1D::write_csv(&cmp.euler_states, buf))?;
    let diag_csv = csv_file(
        "euler_diagnostics.csv",
        &["t", "mass", "momentum", "max_u", "oscillation", "min_dudx"],
        cmp.euler_diagnostics
            .iter()
            .map(|d| fmt_row(&[d.t, d.mass, d.momentum, d.max_u, d.oscillation, d.min_dudx])),
    )?;

    let fits: serde_json::Value = if config.n_list.len() >= 3 {
        cmp.values
            .w1_spatial
            .iter()
            .zip(&config.epsilon_list)
            .map(|(per_n, &eps)| {
                let finals: Vec<f64> = per_n.iter().map(|series| *series.last().unwrap()).collect();
                json!({ "epsilon": eps, "w1_final_vs_n": log_log_fit(&config.n_list, &finals) })
            })
            .collect()
    } else {
        json!("no fit attempted: fewer than 3 values of N")
    };
    let halt = cmp.halted.map(|h| {
        format!(
            "euler solve stopped at t = {} on steepening (min du/dx = {}, dt = {}); report truncated there",
            h.t, h.min_dudx, h.dt
        )
    });
    let results = json!({
        "domain": [x_min, x_max],
        "comparison": cmp,
        "fits": fits,
    });
    Ok(report(config, vec![rows_csv, states_csv, diag_csv], results, halt))
}
