use topoflock::euler1d::{euler_solve, restricted_l1, EulerState1D};
use topoflock::meanfield::{Marginal, VelocityProfile};
use topoflock::Kernel;

fn solve(cells: usize, t: f64) -> EulerState1D {
    let s = EulerState1D::from_profiles(
        -0.1,
        1.1,
        cells,
        &Marginal::RaisedCosine { lo: 0.0, hi: 1.0 },
        &VelocityProfile::Sine { amplitude: 0.1, frequency: 1.0 },
    )
    .unwrap();
    let run = euler_solve(&s, &Kernel::affine(1.0, 0.5).unwrap(), t, 0.5).unwrap();
    assert!(run.halted.is_none());
    for d in &run.diagnostics {
        assert!((d.mass - 1.0).abs() <= 1e-10);
    }
    run.checkpoints[0].clone()
}

#[test]
fn self_convergence_is_first_order() {
    let (a, b, c) = (solve(128, 0.5), solve(256, 0.5), solve(512, 0.5));
    let e1 = restricted_l1(&a, &b).unwrap();
    let e2 = restricted_l1(&b, &c).unwrap();
    eprintln!("e(128,256) = {e1:e}, e(256,512) = {e2:e}, ratio {}", e2 / e1);
    assert!(e2 <= 0.6 * e1);
}
