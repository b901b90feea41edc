use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{advect_in_reference_field, sample_iid, InitialDatum, MeanFieldError};
use crate::dynamics::{simulate, step_times, Frame};
use crate::ensemble::ParticleEnsemble;
use crate::kernel::Kernel;
use crate::measures::{wasserstein1_assignment, EmpiricalMeasure};
use crate::neighbors::distance;
use crate::seeding::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosParams {
    pub n_list: Vec<usize>,
    pub m_ref: usize,
    pub trials: usize,
    pub f0: InitialDatum,
    pub kernel: Kernel,
    pub dt: f64,
    pub t_final: f64,
    pub rng_seed: u64,
    /// Optional cap on interaction evaluations (pairs per force call summed over calls).
    pub max_work: Option<u64>,
}

/// Per-trial deviation curves for one `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSeries {
    pub trial: usize,
    pub mean_dev: Vec<f64>,
    pub max_dev: Vec<f64>,
    pub w1: Vec<f64>,
    /// `(1 / N(N-1)) sum_{i != j} phi_i phi_j` at the final time.
    pub pair_product: f64,
    /// `(1 / N) sum_i phi_i` at the final time.
    pub phi_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosRunResult {
    pub n: usize,
    pub times: Vec<f64>,
    /// Trial mean of `(1/N) sum_i |x_i - y_i| + |v_i - w_i|`.
    pub d_n_estimate: Vec<f64>,
    /// Trial mean of the largest per-agent deviation.
    pub delta_estimate: Vec<f64>,
    pub w1_times: Vec<f64>,
    /// Trial mean of the phase-space `W1` between coupled and test empirical measures.
    pub w1_marginal: Vec<f64>,
    /// Covariance of `phi` on two distinct coupled agents at the final time.
    pub pair_covariance: f64,
    /// Median over trials of the final mean deviation.
    pub final_median: f64,
    pub trials: usize,
    pub rng_seed: u64,
    pub truncated: bool,
    #[serde(skip)]
    pub per_trial: Vec<TrialSeries>,
}

/// Bounded Lipschitz observable used for the two-particle factorization check.
fn phi(x: &[f64], v: &[f64]) -> f64 {
    (x.iter().sum::<f64>() + v.iter().sum::<f64>()).tanh()
}

impl ChaosParams {
    pub fn validate(&self) -> Result<(), MeanFieldError> {
        let bad = |m: String| Err(MeanFieldError::Parameters(m));
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad("n_list must be non-empty with positive entries".into());
        }
        let max_n = *self.n_list.iter().max().unwrap();
        if self.m_ref < max_n {
            return bad(format!("m_ref = {} is below the largest N = {max_n}", self.m_ref));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        self.f0.validate()?;
        step_times(self.dt, self.t_final)?;
        Ok(())
    }

    /// Pair interactions evaluated by one trial.
    pub fn work_per_trial(&self) -> u64 {
        let steps = step_times(self.dt, self.t_final).map_or(0, |t| t.len() - 1) as u128;
        let m = self.m_ref as u128;
        let per_eval: u128 = m * m + self.n_list.iter().map(|&n| (n as u128) * (n as u128 + m)).sum::<u128>();
        (4 * steps * per_eval).min(u64::MAX as u128) as u64
    }
}

/// Coupled particle system against a frozen large reference, per trial and `N`.
///
/// Trial `k` draws its reference ensemble from seed slot `(k, 0)` and the
/// sample of the `j`-th `N` from slot `(k, 1 + j)`. Trials run in parallel
/// and are merged in index order.
pub fn chaos_experiment(params: &ChaosParams) -> Result<Vec<ChaosRunResult>, MeanFieldError> {
    params.validate()?;
    let per_trial = params.work_per_trial().max(1);
    let (trials, truncated) = match params.max_work {
        Some(budget) if budget / per_trial < params.trials as u64 => {
            let fit = (budget / per_trial) as usize;
            if fit == 0 {
                return Err(MeanFieldError::Budget { budget, per_trial });
            }
            (fit, true)
        }
        _ => (params.trials, false),
    };
    let runs: Vec<Vec<TrialSeries>> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(params, t))
        .collect::<Result<_, _>>()?;
    let times = step_times(params.dt, params.t_final)?;
    let w1_steps = checkpoints(times.len() - 1);
    let w1_times: Vec<f64> = w1_steps.iter().map(|&k| times[k]).collect();

    let mut out = Vec::with_capacity(params.n_list.len());
    for (j, &n) in params.n_list.iter().enumerate() {
        let series: Vec<TrialSeries> = runs.iter().map(|r| r[j].clone()).collect();
        let mean_over = |f: &dyn Fn(&TrialSeries) -> &Vec<f64>, len: usize| -> Vec<f64> {
            (0..len)
                .map(|k| series.iter().map(|s| f(s)[k]).sum::<f64>() / trials as f64)
                .collect()
        };
        let d_n_estimate = mean_over(&|s| &s.mean_dev, times.len());
        let delta_estimate = mean_over(&|s| &s.max_dev, times.len());
        let w1_marginal = mean_over(&|s| &s.w1, w1_times.len());
        let pair = series.iter().map(|s| s.pair_product).sum::<f64>() / trials as f64;
        let mean_phi = series.iter().map(|s| s.phi_mean).sum::<f64>() / trials as f64;
        let finals: Vec<f64> = series.iter().map(|s| *s.mean_dev.last().unwrap()).collect();
        out.push(ChaosRunResult {
            n,
            times: times.clone(),
            d_n_estimate,
            delta_estimate,
            w1_times: w1_times.clone(),
            w1_marginal,
            pair_covariance: if n >= 2 { pair - mean_phi * mean_phi } else { f64::NAN },
            final_median: median(&finals),
            trials,
            rng_seed: params.rng_seed,
            truncated,
            per_trial: series,
        });
    }
    Ok(out)
}

/// Step indices at which the assignment `W1` is evaluated: start, middle, end.
fn checkpoints(steps: usize) -> Vec<usize> {
    let mut k = vec![0, steps / 2, steps];
    k.dedup();
    k
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn run_trial(p: &ChaosParams, trial: usize) -> Result<Vec<TrialSeries>, MeanFieldError> {
    let t = trial as u64;
    let reference = sample_iid(&p.f0, p.m_ref, derive_seed(p.rng_seed, t, 0))?;
    let ref_frames = simulate(&reference, &p.kernel, p.dt, p.t_final, 1)?.frames;
    let w1_steps = checkpoints(ref_frames.len() - 1);
    let mut out = Vec::with_capacity(p.n_list.len());
    for (j, &n) in p.n_list.iter().enumerate() {
        let z = sample_iid(&p.f0, n, derive_seed(p.rng_seed, t, 1 + j as u64))?;
        let coupled = simulate(&z, &p.kernel, p.dt, p.t_final, 1)?.frames;
        let tests = advect_in_reference_field(&z, &ref_frames, &p.kernel, p.dt)?;
        let (mean_dev, max_dev): (Vec<f64>, Vec<f64>) =
            coupled.iter().zip(&tests).map(|(a, b)| deviation(&a.ensemble, &b.ensemble)).unzip();
        let w1 = w1_steps
            .iter()
            .map(|&k| phase_w1(&coupled[k], &tests[k]))
            .collect::<Result<_, _>>()?;
        let last = &coupled.last().unwrap().ensemble;
        let phis: Vec<f64> = (0..n).map(|i| phi(last.position(i), last.velocity(i))).collect();
        let s: f64 = phis.iter().sum();
        let s2: f64 = phis.iter().map(|p| p * p).sum();
        out.push(TrialSeries {
            trial,
            mean_dev,
            max_dev,
            w1,
            pair_product: if n >= 2 { (s * s - s2) / (n as f64 * (n as f64 - 1.0)) } else { f64::NAN },
            phi_mean: s / n as f64,
        });
    }
    Ok(out)
}

fn phase_w1(a: &Frame, b: &Frame) -> Result<f64, MeanFieldError> {
    Ok(wasserstein1_assignment(&EmpiricalMeasure::phase(&a.ensemble), &EmpiricalMeasure::phase(&b.ensemble))?)
}

/// Mean and max over agents of `|x_i - y_i| + |v_i - w_i|`.
fn deviation(a: &ParticleEnsemble, b: &ParticleEnsemble) -> (f64, f64) {
    let n = a.len();
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for i in 0..n {
        let dev = distance(a.position(i), b.position(i)) + distance(a.velocity(i), b.velocity(i));
        sum += dev;
        max = max.max(dev);
    }
    (sum / n as f64, max)
}

/// Long-format CSV `N,trial,t,mean_dev,max_dev`.
pub fn write_chaos_csv<W: Write>(results: &[ChaosRunResult], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "trial", "t", "mean_dev", "max_dev"])?;
    for r in results {
        for s in &r.per_trial {
            for (k, t) in r.times.iter().enumerate() {
                w.write_record(&[
                    r.n.to_string(),
                    s.trial.to_string(),
                    t.to_string(),
                    s.mean_dev[k].to_string(),
                    s.max_dev[k].to_string(),
                ])?;
            }
        }
    }
    w.flush()
}
