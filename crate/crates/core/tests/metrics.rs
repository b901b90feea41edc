use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topoflock::measures::{discrepancy_1d, discrepancy_candidates, EmpiricalMeasure, GridDensity1D};

/// Direct scan: centers on a dense grid, every center-to-atom distance as a
/// closed radius, masses counted by brute force.
fn grid_scan(a: &[[f64; 2]], b: &[[f64; 2]], g: usize) -> f64 {
    let all: Vec<[f64; 2]> = a.iter().chain(b).cloned().collect();
    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for p in &all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let pad = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let dist = |c: [f64; 2], p: [f64; 2]| ((c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2)).sqrt();
    let mut best = 0.0f64;
    for ix in 0..=g {
        for iy in 0..=g {
            let c = [
                lo[0] - pad + (hi[0] - lo[0] + 2.0 * pad) * ix as f64 / g as f64,
                lo[1] - pad + (hi[1] - lo[1] + 2.0 * pad) * iy as f64 / g as f64,
            ];
            for &q in &all {
                let r = dist(c, q);
                let ma = a.iter().filter(|&&p| dist(c, p) <= r).count() as f64 / a.len() as f64;
                let mb = b.iter().filter(|&&p| dist(c, p) <= r).count() as f64 / b.len() as f64;
                best = best.max((ma - mb).abs());
            }
        }
    }
    best
}

fn measure(pts: &[[f64; 2]]) -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(2, pts.iter().flatten().cloned().collect()).unwrap()
}

#[test]
fn planar_discrepancy_matches_grid_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut misses = 0;
    for case in 0..25 {
        let n = rng.gen_range(2..=10);
        let m = rng.gen_range(2..=10);
        let a: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
        let b: Vec<[f64; 2]> = (0..m).map(|_| [rng.gen(), rng.gen()]).collect();
        let cand = discrepancy_candidates(&measure(&a), &measure(&b), 2).unwrap();
        let scan = grid_scan(&a, &b, 400);
        assert!(cand >= scan - 1e-12, "case {case}: candidates {cand} below scan {scan}");
        if (cand - scan).abs() > 1e-9 { misses += 1; eprintln!("case {case}: {cand} vs {scan}"); }
    }
    assert_eq!(misses, 0);
}

/// Constants for `D(mu_X, mu_Y) <= C1 |rho|_inf delta + C2 D(mu_Y, rho)` when
/// every atom moves by at most `delta`. Frozen from a calibration suite whose
/// worst ratio was 1.69 with C1 = C2.
const C1: f64 = 2.0;
const C2: f64 = 2.0;

#[test]
fn small_displacements_move_discrepancy_boundedly() {
    let two_pi = 2.0 * std::f64::consts::PI;
    let rhos = [
        GridDensity1D::uniform(0.0, 1.0).unwrap(),
        GridDensity1D::from_antiderivative(0.0, 1.0, 256, |x| x - (two_pi * x).sin() / two_pi).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..400 {
        let rho = &rhos[case % 2];
        let n = [32, 64, 128, 256, 512, 1024][rng.gen_range(0..6)];
        let delta = 10f64.powf(rng.gen_range(-3.0..-1.0));
        let y: Vec<f64> = (0..n).map(|_| rho.sample(&mut rng)).collect();
        // Rigid shift, random jitter, and a compression toward the middle.
        let x: Vec<f64> = y
            .iter()
            .map(|&p| match case % 3 {
                0 => p + delta,
                1 => p + delta * rng.gen_range(-1.0..1.0),
                _ => p + if p < 0.5 { delta } else { -delta },
            })
            .collect();
        let my = EmpiricalMeasure::uniform(1, y).unwrap();
        let mx = EmpiricalMeasure::uniform(1, x).unwrap();
        let lhs = discrepancy_1d(&mx, &my).unwrap();
        let rhs = C1 * rho.sup_norm() * delta + C2 * discrepancy_1d(&my, rho).unwrap();
        assert!(lhs <= rhs, "case {case}: {lhs} > {rhs} (n = {n}, delta = {delta})");
    }
}
