use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::euler1d::{Observable, MAX_CFL};
use crate::kernel::Kernel;
use crate::meanfield::InitialDatum;

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Fournier,
    Chaos,
    EulerCompare,
    MetricsSelftest,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Simulate,
        Experiment::Fournier,
        Experiment::Chaos,
        Experiment::EulerCompare,
        Experiment::MetricsSelftest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Fournier => "fournier",
            Experiment::Chaos => "chaos",
            Experiment::EulerCompare => "euler-compare",
            Experiment::MetricsSelftest => "metrics-selftest",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment {s:?}; valid names: {}", names.join(", "))
        })
    }
}

/// Config document as written by the user; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    kernel: Option<Kernel>,
    initial: Option<InitialDatum>,
    n_list: Option<Vec<usize>>,
    m_ref: Option<usize>,
    trials: Option<usize>,
    dt: Option<f64>,
    t_final: Option<f64>,
    epsilon_list: Option<Vec<f64>>,
    grid_cells: Option<usize>,
    rng_seed: Option<u64>,
    output_dir: Option<String>,
    observer_stride: Option<usize>,
    cfl: Option<f64>,
    domain: Option<[f64; 2]>,
    checkpoint_stride: Option<usize>,
    observable: Option<Observable>,
    max_work: Option<u64>,
    refine: Option<u32>,
    units: Option<serde_json::Value>,
}

/// Fully resolved configuration; echoed verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub kernel: Option<Kernel>,
    pub initial: Option<InitialDatum>,
    pub n_list: Vec<usize>,
    pub m_ref: Option<usize>,
    pub trials: usize,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub epsilon_list: Vec<f64>,
    pub grid_cells: usize,
    pub rng_seed: u64,
    pub output_dir: Option<String>,
    pub observer_stride: usize,
    pub cfl: f64,
    pub domain: Option<[f64; 2]>,
    pub checkpoint_stride: usize,
    pub observable: Observable,
    pub max_work: Option<u64>,
    pub refine: u32,
    pub units: Option<serde_json::Value>,
}

pub const DEFAULT_TRIALS: usize = 16;
pub const DEFAULT_GRID_CELLS: usize = 512;
pub const DEFAULT_CFL: f64 = 0.5;
pub const DEFAULT_REFINE: u32 = 2;

/// Reads and validates a JSON config. `experiment` (from the command line)
/// takes precedence and must agree with the document's own field if set;
/// `seed` overrides `rng_seed`.
pub fn load_config(path: &Path, experiment: Option<Experiment>, seed: Option<u64>) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    parse_config(&text, experiment, seed)
}

pub fn parse_config(text: &str, experiment: Option<Experiment>, seed: Option<u64>) -> Result<ExperimentConfig, ExperimentError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ExperimentError::Validation(vec![format!("config: {e}")]))?;
    resolve(raw, experiment, seed)
}

fn resolve(raw: RawConfig, cli_experiment: Option<Experiment>, cli_seed: Option<u64>) -> Result<ExperimentConfig, ExperimentError> {
    let mut errs: Vec<String> = Vec::new();
    let doc_experiment = match raw.experiment.as_deref().map(Experiment::from_str) {
        Some(Ok(e)) => Some(e),
        Some(Err(msg)) => {
            errs.push(format!("experiment: {msg}"));
            None
        }
        None => None,
    };
    let experiment = match (cli_experiment, doc_experiment) {
        (Some(c), Some(d)) if c != d => {
            errs.push(format!("experiment: command line says {c} but config says {d}"));
            c
        }
        (Some(c), _) => c,
        (None, Some(d)) => d,
        (None, None) => {
            errs.push("experiment: missing".into());
            return Err(ExperimentError::Validation(errs));
        }
    };
    use Experiment::*;
    let needs = |list: &[Experiment]| list.contains(&experiment);

    let rng_seed = match cli_seed.or(raw.rng_seed) {
        Some(s) => s,
        None => {
            errs.push("rng_seed: missing (no wall-clock seeding; set it in the config or pass --seed)".into());
            0
        }
    };

    let kernel = match raw.kernel.map(Kernel::validated) {
        Some(Ok(k)) => Some(k),
        Some(Err(e)) => {
            errs.push(format!("kernel: {e}"));
            None
        }
        None => {
            if needs(&[Simulate, Chaos, EulerCompare]) {
                errs.push("kernel: missing".into());
            }
            None
        }
    };

    let initial = raw.initial;
    match &initial {
        Some(d) => {
            if let Err(e) = d.validate() {
                errs.push(format!("initial: {e}"));
            }
            if experiment == EulerCompare && !matches!(d, InitialDatum::Monokinetic { .. }) {
                errs.push("initial: euler-compare needs a monokinetic datum".into());
            }
            if experiment == Fournier && d.dim() > 2 {
                errs.push("initial: fournier supports dimensions 1 and 2".into());
            }
        }
        None => {
            if needs(&[Simulate, Fournier, Chaos, EulerCompare]) {
                errs.push("initial: missing".into());
            }
        }
    }

    let n_list = raw.n_list.unwrap_or_default();
    if needs(&[Simulate, Fournier, Chaos, EulerCompare]) {
        if n_list.is_empty() {
            errs.push("n_list: missing or empty".into());
        } else if n_list.contains(&0) {
            errs.push("n_list: entries must be positive".into());
        } else if n_list.windows(2).any(|w| w[1] <= w[0]) {
            errs.push("n_list: must be strictly increasing".into());
        }
        if experiment == Simulate && n_list.len() > 1 {
            errs.push("n_list: simulate takes exactly one ensemble size".into());
        }
        if experiment == Fournier && n_list.first().is_some_and(|&n| n < 2) {
            errs.push("n_list: fournier needs N >= 2".into());
        }
    }

    let positive = |name: &str, v: Option<f64>, required: bool, errs: &mut Vec<String>| -> Option<f64> {
        match v {
            Some(x) if x.is_finite() && x > 0.0 => Some(x),
            Some(x) => {
                errs.push(format!("{name}: must be positive and finite, got {x}"));
                None
            }
            None if required => {
                errs.push(format!("{name}: missing"));
                None
            }
            None => None,
        }
    };
    let dt = positive("dt", raw.dt, needs(&[Simulate, Chaos, EulerCompare]), &mut errs);
    let t_final = match raw.t_final {
        Some(t) if t.is_finite() && t >= 0.0 => Some(t),
        Some(t) => {
            errs.push(format!("t_final: must be non-negative and finite, got {t}"));
            None
        }
        None => {
            if needs(&[Simulate, Chaos, EulerCompare]) {
                errs.push("t_final: missing".into());
            }
            None
        }
    };

    let positive_int = |name: &str, v: Option<usize>, default: usize, errs: &mut Vec<String>| -> usize {
        match v {
            Some(0) => {
                errs.push(format!("{name}: must be at least 1"));
                default
            }
            Some(x) => x,
            None => default,
        }
    };
    let trials = positive_int("trials", raw.trials, DEFAULT_TRIALS, &mut errs);
    let grid_cells = positive_int("grid_cells", raw.grid_cells, DEFAULT_GRID_CELLS, &mut errs);
    let observer_stride = positive_int("observer_stride", raw.observer_stride, 1, &mut errs);
    let checkpoint_stride = positive_int("checkpoint_stride", raw.checkpoint_stride, 1, &mut errs);

    let max_n = n_list.iter().copied().max().unwrap_or(0);
    let m_ref = if experiment == Chaos {
        match raw.m_ref {
            Some(m) if m < max_n => {
                errs.push(format!("m_ref: {m} is below the largest N = {max_n}"));
                Some(m)
            }
            Some(m) => Some(m),
            None => Some(8 * max_n),
        }
    } else {
        raw.m_ref
    };

    let epsilon_list = raw.epsilon_list.unwrap_or_default();
    if experiment == EulerCompare && epsilon_list.is_empty() {
        errs.push("epsilon_list: missing or empty".into());
    }
    if epsilon_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        errs.push("epsilon_list: entries must be non-negative and finite".into());
    }

    let cfl = raw.cfl.unwrap_or(DEFAULT_CFL);
    if !(cfl > 0.0 && cfl <= MAX_CFL) {
        errs.push(format!("cfl: must lie in (0, {MAX_CFL}], got {cfl}"));
    }
    if let Some([lo, hi]) = raw.domain {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            errs.push(format!("domain: [{lo}, {hi}] is not an interval"));
        }
    }
    if raw.max_work == Some(0) {
        errs.push("max_work: must be positive".into());
    }

    if !errs.is_empty() {
        return Err(ExperimentError::Validation(errs));
    }
    Ok(ExperimentConfig {
        experiment,
        kernel,
        initial,
        n_list,
        m_ref,
        trials,
        dt,
        t_final,
        epsilon_list,
        grid_cells,
        rng_seed,
        output_dir: raw.output_dir,
        observer_stride,
        cfl,
        domain: raw.domain,
        checkpoint_stride,
        observable: raw.observable.unwrap_or(Observable::Tanh),
        max_work: raw.max_work,
        refine: raw.refine.unwrap_or(DEFAULT_REFINE),
        units: raw.units,
    })
}
