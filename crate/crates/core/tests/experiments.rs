use topoflock::experiments::{parse_config, run_experiment, Experiment};

/// `int_0^1 |x - G(x)| dx` for the empirical CDF `G` of atoms `a <= b`.
fn w1_two_atoms(a: f64, b: f64) -> f64 {
    let mid = |lo: f64, hi: f64| {
        // int_lo^hi |x - 1/2| dx
        let f = |x: f64| 0.5 * (x - 0.5) * (x - 0.5).abs();
        f(hi) - f(lo)
    };
    0.5 * a * a + mid(a, b) + 0.5 * (1.0 - b) * (1.0 - b)
}

#[test]
fn two_atom_mean_matches_order_statistics_integral() {
    // E over the order statistics (density 2 on a < b), midpoint rule.
    let m = 2000;
    let h = 1.0 / m as f64;
    let mut expected = 0.0;
    for i in 0..m {
        let a = (i as f64 + 0.5) * h;
        for j in i..m {
            let b = (j as f64 + 0.5) * h;
            let weight = if i == j { 1.0 } else { 2.0 };
            expected += weight * w1_two_atoms(a, b);
        }
    }
    expected *= h * h;

    let config = parse_config(
        r#"{"initial": {"kind": "product", "dim": 1,
                        "position": {"shape": "uniform", "lo": 0.0, "hi": 1.0},
                        "velocity": {"shape": "uniform", "lo": 0.0, "hi": 1.0}},
            "n_list": [2], "trials": 20000, "rng_seed": 17}"#,
        Some(Experiment::Fournier),
        None,
    )
    .unwrap();
    let r = run_experiment(&config).unwrap();
    let mean = r.results["mean_w1"][0].as_f64().unwrap();
    let se = r.results["std_error"][0].as_f64().unwrap();
    assert!((mean - expected).abs() <= 4.0 * se, "mean {mean} vs {expected} (se {se})");
    // A single N cannot be fitted.
    assert!(r.results["rate_fit"]["fit"].is_null());
    assert!(r.results["rate_fit"]["error"].as_str().unwrap().contains("at least 3"));
}

const SMALL_CHAOS: &str = r#"{
    "kernel": {"family": "constant", "kappa": 1.0},
    "initial": {"kind": "product", "dim": 1,
                "position": {"shape": "uniform", "lo": 0.0, "hi": 1.0},
                "velocity": {"shape": "uniform", "lo": -1.0, "hi": 1.0}},
    "n_list": [16, 32, 64, 128, 256], "m_ref": 1024, "trials": 64,
    "dt": 0.1, "t_final": 1.0, "rng_seed": 2
}"#;

#[test]
fn constant_kernel_chaos_decays_at_the_clt_rate() {
    // With K constant the deviation is proportional to |mean_N(v) - mean_ref(v)|,
    // of size sqrt(1/N + 1/m_ref): slope about -0.45 over this window.
    let config = parse_config(SMALL_CHAOS, Some(Experiment::Chaos), None).unwrap();
    let r = run_experiment(&config).unwrap();
    let slope = r.results["fit_mean"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}");
    assert_eq!(r.results["variance_available"], true);
}

#[test]
fn single_trial_chaos_flags_missing_variance() {
    let text = SMALL_CHAOS.replace("\"trials\": 64", "\"trials\": 1").replace("\"m_ref\": 1024", "\"m_ref\": 256");
    let config = parse_config(&text, Some(Experiment::Chaos), None).unwrap();
    let r = run_experiment(&config).unwrap();
    assert_eq!(r.results["variance_available"], false);
    assert!(r.results["final_std_dev"][0].is_null());
}

#[test]
fn single_cell_euler_report_has_no_fit() {
    let config = parse_config(
        r#"{"kernel": {"family": "affine", "a": 1.0, "b": 0.5},
            "initial": {"kind": "monokinetic",
                        "density": {"shape": "raised_cosine", "lo": 0.0, "hi": 1.0},
                        "velocity": {"profile": "sine", "amplitude": 0.1, "frequency": 1.0}},
            "n_list": [64], "epsilon_list": [0.01], "grid_cells": 64,
            "dt": 0.05, "t_final": 0.2, "trials": 1, "rng_seed": 2}"#,
        Some(Experiment::EulerCompare),
        None,
    )
    .unwrap();
    let r = run_experiment(&config).unwrap();
    assert!(r.halt.is_none());
    assert!(r.results["fits"].as_str().unwrap().starts_with("no fit attempted"));
    assert_eq!(r.results["comparison"]["values"]["w1_spatial"].as_array().unwrap().len(), 1);
}

#[test]
fn rerun_gives_identical_csv_bytes() {
    let config = parse_config(SMALL_CHAOS, Some(Experiment::Chaos), None).unwrap();
    let mut small = config.clone();
    small.n_list = vec![8, 16, 32];
    small.m_ref = Some(128);
    small.trials = 3;
    let a = run_experiment(&small).unwrap();
    let b = run_experiment(&small).unwrap();
    assert_eq!(a.files, b.files);
}
