use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::runners::csv_file;
use super::{ExperimentConfig, ExperimentError, Report};
use crate::measures::{
    check_dw1, discrepancy_1d, wasserstein1_1d, wasserstein1_assignment, EmpiricalMeasure, GridDensity1D,
};
use crate::neighbors::distance;
use crate::seeding::{derive_seed, stream_rng};

const CHECKS: [&str; 4] = ["assignment_bruteforce", "assignment_vs_cdf_1d", "discrepancy_1d_scan", "dw1_ratio"];
const EXACT_TOL: f64 = 1e-12;
const SCAN_TOL: f64 = 1e-9;
const DW1_BOUND: f64 = 10.0;
const LATTICE: usize = 32;

struct Outcome {
    check: usize,
    instance: usize,
    n: usize,
    value: f64,
    reference: f64,
    pass: bool,
}

/// Smallest mean matching cost over all permutations.
fn brute_force_w1(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    fn go(k: usize, perm: &mut Vec<usize>, a: &EmpiricalMeasure, b: &EmpiricalMeasure, best: &mut f64) {
        if k == perm.len() {
            let c: f64 = perm.iter().enumerate().map(|(i, &j)| distance(a.point(i), b.point(j))).sum();
            *best = best.min(c);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            go(k + 1, perm, a, b, best);
            perm.swap(k, i);
        }
    }
    let mut perm: Vec<usize> = (0..a.len()).collect();
    let mut best = f64::INFINITY;
    go(0, &mut perm, a, b, &mut best);
    best / a.len() as f64
}

/// `sup |mu([a,b]) - nu([a,b])|` over lattice intervals, by direct counting.
fn lattice_scan(mu: &[usize], nu: &[usize]) -> f64 {
    let mass = |atoms: &[usize], lo: usize, hi: usize| atoms.iter().filter(|&&j| lo <= j && j <= hi).count() as f64 / atoms.len() as f64;
    let mut best = 0f64;
    for lo in 0..=LATTICE {
        for hi in lo..=LATTICE {
            best = best.max((mass(mu, lo, hi) - mass(nu, lo, hi)).abs());
        }
    }
    best
}

fn lattice_measure(atoms: &[usize]) -> Result<EmpiricalMeasure, ExperimentError> {
    Ok(EmpiricalMeasure::uniform(1, atoms.iter().map(|&j| j as f64 / LATTICE as f64).collect())?)
}

fn run_check(check: usize, instance: usize, master: u64, rho: &GridDensity1D) -> Result<Outcome, ExperimentError> {
    let mut rng = stream_rng(derive_seed(master, instance as u64, check as u64), 0);
    let (n, value, reference, pass) = match check {
        0 => {
            let n = 1 + instance % 6;
            let a = EmpiricalMeasure::uniform(2, (0..2 * n).map(|_| rng.gen::<f64>()).collect())?;
            let b = EmpiricalMeasure::uniform(2, (0..2 * n).map(|_| rng.gen::<f64>()).collect())?;
            let (v, r) = (wasserstein1_assignment(&a, &b)?, brute_force_w1(&a, &b));
            (n, v, r, (v - r).abs() <= EXACT_TOL)
        }
        1 => {
            let n = rng.gen_range(1..=40);
            let a = EmpiricalMeasure::uniform(1, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
            let b = EmpiricalMeasure::uniform(1, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
            let (v, r) = (wasserstein1_assignment(&a, &b)?, wasserstein1_1d(&a, &b)?);
            (n, v, r, (v - r).abs() <= EXACT_TOL)
        }
        2 => {
            let n = rng.gen_range(1..=200);
            let m = rng.gen_range(1..=200);
            let mu: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=LATTICE)).collect();
            let nu: Vec<usize> = (0..m).map(|_| rng.gen_range(0..=LATTICE)).collect();
            let v = discrepancy_1d(&lattice_measure(&mu)?, &lattice_measure(&nu)?)?;
            let r = lattice_scan(&mu, &nu);
            (n.max(m), v, r, (v - r).abs() <= SCAN_TOL)
        }
        _ => {
            let n = rng.gen_range(1..=200);
            let nu = EmpiricalMeasure::uniform(1, (0..n).map(|_| rho.sample(&mut rng)).collect())?;
            let ratio = check_dw1(&nu, rho)?.ratio;
            (n, ratio, DW1_BOUND, ratio < DW1_BOUND)
        }
    };
    Ok(Outcome { check, instance, n, value, reference, pass })
}

/// Randomized cross-checks of the metric implementations against direct
/// computations: `trials` instances per check, seeded per `(instance, check)`.
pub fn run_metrics_selftest(config: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let rho = GridDensity1D::from_antiderivative(0.0, 1.0, 64, |x| x - (2.0 * std::f64::consts::PI * x).sin() / (2.0 * std::f64::consts::PI))?;
    let jobs: Vec<(usize, usize)> =
        (0..CHECKS.len()).flat_map(|c| (0..config.trials).map(move |i| (c, i))).collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(c, i)| run_check(c, i, config.rng_seed, &rho))
        .collect::<Result<_, _>>()?;

    let file = csv_file(
        "checks.csv",
        &["check", "instance", "n", "value", "reference", "abs_error", "pass"],
        outcomes.iter().map(|o| {
            vec![
                CHECKS[o.check].to_string(),
                o.instance.to_string(),
                o.n.to_string(),
                o.value.to_string(),
                o.reference.to_string(),
                (o.value - o.reference).abs().to_string(),
                o.pass.to_string(),
            ]
        }),
    )?;
    let summary: Vec<serde_json::Value> = CHECKS
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let rows: Vec<&Outcome> = outcomes.iter().filter(|o| o.check == c).collect();
            let failed = rows.iter().filter(|o| !o.pass).count();
            let worst = if c == 3 {
                rows.iter().map(|o| o.value).fold(0.0, f64::max)
            } else {
                rows.iter().map(|o| (o.value - o.reference).abs()).fold(0.0, f64::max)
            };
            json!({ "check": name, "instances": rows.len(), "failed": failed, "worst": worst })
        })
        .collect();
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    let halt = (failed > 0).then(|| format!("{failed} self-test instances failed"));
    let results = json!({ "checks": summary, "failed": failed, "passed": failed == 0 });
    Ok(Report { config: config.clone(), files: vec![file], results, halt, wall_clock_seconds: 0.0 })
}
