//! One-dimensional pressureless Euler system with topological alignment,
//!
//! ```text
//! rho_t + (rho u)_x = 0
//! u_t + u u_x = int K(M[rho](x, |x - y|)) (u(y) - u(x)) rho(y) dy
//! ```
//!
//! discretized with first-order upwind fluxes and SSP-RK2 on a uniform grid
//! with zero-flux walls. Occupied cells evolve `(rho, rho u)` in conservation
//! form; vacuum cells carry `u` by upwind transport only.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{simulate, DynamicsError};
use crate::kernel::Kernel;
use crate::meanfield::{monokinetic_sample, Marginal, MeanFieldError, VelocityProfile};
use crate::measures::{fournier_rate, wasserstein1_1d, EmpiricalMeasure, GridDensity1D, MeasureError, SpatialMeasure};
use crate::seeding::derive_seed;

/// Cells with less density than this are vacuum.
pub const RHO_FLOOR: f64 = 1e-12;
/// Largest admissible Courant number.
pub const MAX_CFL: f64 = 0.5;
/// A step is refused when the blow-up time `-1 / min u_x` predicted by the
/// Riccati equation `(u_x)' = -u_x^2` is shorter than this many maximal CFL
/// steps. Under the CFL limit a single step can never resolve the crossing
/// itself, since `|u_{k+1} - u_k| / dx <= 2 max|u| / dx`.
pub const SHOCK_HORIZON_STEPS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EulerError {
    #[error("invalid state: {0}")]
    State(String),
    #[error("density is not normalized: mass {0}")]
    Mass(f64),
    #[error("step dt = {dt} violates the CFL limit; largest admissible dt is {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },
    #[error("velocity gradient {min_dudx} at t = {t} predicts blow-up within {horizon} steps of dt = {dt}")]
    Shock { t: f64, dt: f64, min_dudx: f64, horizon: f64 },
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerState1D {
    pub x_min: f64,
    pub x_max: f64,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
}

impl EulerState1D {
    pub fn new(x_min: f64, x_max: f64, rho: Vec<f64>, u: Vec<f64>, t: f64) -> Result<Self, EulerError> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(EulerError::State(format!("bad domain [{x_min}, {x_max}]")));
        }
        if rho.is_empty() || rho.len() != u.len() {
            return Err(EulerError::State(format!("{} density cells vs {} velocity cells", rho.len(), u.len())));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || u.iter().any(|v| !v.is_finite()) {
            return Err(EulerError::State("entries must be finite with rho >= 0".into()));
        }
        Ok(Self { x_min, x_max, rho, u, t })
    }

    /// Exact cell averages of `density` and point values of `u0` at cell centers.
    pub fn from_profiles(
        x_min: f64,
        x_max: f64,
        cells: usize,
        density: &Marginal,
        u0: &VelocityProfile,
    ) -> Result<Self, EulerError> {
        let g = density.to_grid(x_min, x_max, cells)?;
        let u = (0..cells).map(|k| u0.eval(g.center(k))).collect();
        Self::new(x_min, x_max, g.values().to_vec(), u, 0.0)
    }

    pub fn cells(&self) -> usize {
        self.rho.len()
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells() as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * ((k as f64 + 0.5) / self.cells() as f64)
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.dx()
    }

    pub fn momentum(&self) -> f64 {
        self.rho.iter().zip(&self.u).map(|(r, u)| r * u).sum::<f64>() * self.dx()
    }

    /// The density as a grid measure (mass must be 1 within `1e-10`).
    pub fn density(&self) -> Result<GridDensity1D, EulerError> {
        GridDensity1D::new(self.x_min, self.x_max, self.rho.clone()).map_err(|_| EulerError::Mass(self.mass()))
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let occupied = |k: usize| self.rho[k] >= RHO_FLOOR;
        let mut max_u = 0.0f64;
        let (mut u_lo, mut u_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in (0..self.cells()).filter(|&k| occupied(k)) {
            max_u = max_u.max(self.u[k].abs());
            u_lo = u_lo.min(self.u[k]);
            u_hi = u_hi.max(self.u[k]);
        }
        Diagnostics {
            t: self.t,
            mass: self.mass(),
            momentum: self.momentum(),
            max_u,
            oscillation: if u_hi >= u_lo { u_hi - u_lo } else { 0.0 },
            min_dudx: self.min_dudx(),
        }
    }

    /// Smallest forward difference `(u_{k+1} - u_k) / dx` between occupied cells.
    pub fn min_dudx(&self) -> f64 {
        let dx = self.dx();
        (0..self.cells().saturating_sub(1))
            .filter(|&k| self.rho[k] >= RHO_FLOOR && self.rho[k + 1] >= RHO_FLOOR)
            .map(|k| (self.u[k + 1] - self.u[k]) / dx)
            .fold(f64::INFINITY, f64::min)
    }

    /// Long CSV `t,x,rho,u`.
    pub fn write_csv<W: Write>(states: &[EulerState1D], out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "rho", "u"])?;
        for s in states {
            for k in 0..s.cells() {
                w.write_record(&[s.t.to_string(), s.center(k).to_string(), s.rho[k].to_string(), s.u[k].to_string()])?;
            }
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    /// `max |u|` over occupied cells.
    pub max_u: f64,
    /// `max u - min u` over occupied cells.
    pub oscillation: f64,
    pub min_dudx: f64,
}

/// `A(x_k) = sum_j K(M[rho](x_k, |x_k - x_j|)) (u_j - u_k) rho_j dx` at every
/// occupied cell center; vacuum cells get zero and do not contribute.
pub fn alignment_field(state: &EulerState1D, kernel: &Kernel) -> Result<Vec<f64>, EulerError> {
    let rho = state.density()?;
    Ok(alignment_unchecked(state, &rho, kernel))
}

fn alignment_unchecked(state: &EulerState1D, rho: &GridDensity1D, kernel: &Kernel) -> Vec<f64> {
    let n = state.cells();
    let dx = state.dx();
    let occupied: Vec<usize> = (0..n).filter(|&k| state.rho[k] >= RHO_FLOOR).collect();
    let centers: Vec<f64> = (0..n).map(|k| state.center(k)).collect();
    (0..n)
        .into_par_iter()
        .map(|k| {
            if state.rho[k] < RHO_FLOOR {
                return 0.0;
            }
            let x = [centers[k]];
            let mut acc = 0.0;
            for &j in &occupied {
                let r = (centers[k] - centers[j]).abs();
                let m = rho.ball_mass_unchecked(&x, r).min(1.0);
                acc += kernel.value(m) * (state.u[j] - state.u[k]) * state.rho[j];
            }
            acc * dx
        })
        .collect()
}

/// Semi-discrete rates: `rho_t`, `(rho u)_t` (flux plus `rho A`), and the
/// non-conservative `u_t` used in vacuum cells.
struct Rates {
    rho: Vec<f64>,
    mom: Vec<f64>,
    u_vacuum: Vec<f64>,
}

fn semi_discrete(state: &EulerState1D, kernel: &Kernel) -> Result<Rates, EulerError> {
    let n = state.cells();
    let dx = state.dx();
    let (rho, u) = (&state.rho, &state.u);
    // Upwind fluxes at faces k + 1/2, k = 0..n-1; walls carry no flux.
    let mut f_rho = vec![0.0; n - 1];
    let mut f_mom = vec![0.0; n - 1];
    for k in 0..n - 1 {
        let a = 0.5 * (u[k] + u[k + 1]);
        let up = if a >= 0.0 { k } else { k + 1 };
        f_rho[k] = a * rho[up];
        f_mom[k] = a * rho[up] * u[up];
    }
    let div = |f: &[f64], k: usize| {
        let right = if k + 1 < n { f[k] } else { 0.0 };
        let left = if k > 0 { f[k - 1] } else { 0.0 };
        (right - left) / dx
    };
    let align = alignment_unchecked(state, &state.density()?, kernel);
    let mut rates = Rates {
        rho: Vec::with_capacity(n),
        mom: Vec::with_capacity(n),
        u_vacuum: Vec::with_capacity(n),
    };
    for k in 0..n {
        rates.rho.push(-div(&f_rho, k));
        rates.mom.push(-div(&f_mom, k) + rho[k] * align[k]);
        let grad = if u[k] > 0.0 {
            if k > 0 {
                (u[k] - u[k - 1]) / dx
            } else {
                0.0
            }
        } else if k + 1 < n {
            (u[k + 1] - u[k]) / dx
        } else {
            0.0
        };
        rates.u_vacuum.push(-u[k] * grad);
    }
    Ok(rates)
}

/// Convex combination `a * base + b * (stage + dt * rates(stage))` in
/// `(rho, rho u)`, recovering `u` on occupied cells.
fn combine(base: &EulerState1D, a: f64, stage: &EulerState1D, b: f64, rates: &Rates, dt: f64, t: f64) -> EulerState1D {
    let n = base.cells();
    let mut rho = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for k in 0..n {
        let r = (a * base.rho[k] + b * (stage.rho[k] + dt * rates.rho[k])).max(0.0);
        let m = a * base.rho[k] * base.u[k] + b * (stage.rho[k] * stage.u[k] + dt * rates.mom[k]);
        rho.push(r);
        u.push(if r >= RHO_FLOOR {
            m / r
        } else {
            a * base.u[k] + b * (stage.u[k] + dt * rates.u_vacuum[k])
        });
    }
    EulerState1D {
        x_min: base.x_min,
        x_max: base.x_max,
        rho,
        u,
        t,
    }
}

/// Largest `dt` with `dt max|u| / dx <= cfl`.
pub fn cfl_dt(state: &EulerState1D, cfl: f64) -> f64 {
    let umax = state.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if umax == 0.0 {
        f64::INFINITY
    } else {
        cfl * state.dx() / umax
    }
}

/// One SSP-RK2 step.
pub fn euler_step(state: &EulerState1D, kernel: &Kernel, dt: f64) -> Result<EulerState1D, EulerError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EulerError::Parameters(format!("dt must be positive, got {dt}")));
    }
    let max_dt = cfl_dt(state, MAX_CFL);
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(EulerError::Cfl { dt, max_dt });
    }
    let min_dudx = state.min_dudx();
    if min_dudx * SHOCK_HORIZON_STEPS * max_dt < -1.0 {
        return Err(EulerError::Shock {
            t: state.t,
            dt: max_dt,
            min_dudx,
            horizon: SHOCK_HORIZON_STEPS,
        });
    }
    let stage = combine(state, 0.0, state, 1.0, &semi_discrete(state, kernel)?, dt, state.t + dt);
    let rates = semi_discrete(&stage, kernel)?;
    Ok(combine(state, 0.5, &stage, 0.5, &rates, dt, state.t + dt))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerRun {
    /// States at the requested checkpoint times (those reached).
    pub checkpoints: Vec<EulerState1D>,
    /// Diagnostics after every accepted step, starting with the initial state.
    pub diagnostics: Vec<Diagnostics>,
    /// Set when the run stopped early on steepening.
    pub halted: Option<ShockDiagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShockDiagnostic {
    pub t: f64,
    /// Largest CFL step at the halt.
    pub dt: f64,
    pub min_dudx: f64,
}

/// Integrates to `t_final`, recording the final state.
pub fn euler_solve(initial: &EulerState1D, kernel: &Kernel, t_final: f64, cfl: f64) -> Result<EulerRun, EulerError> {
    euler_solve_checkpoints(initial, kernel, &[t_final], cfl)
}

/// Integrates through the increasing `checkpoints`, landing on each exactly.
/// Stops early (with `halted` set) on steepening.
pub fn euler_solve_checkpoints(
    initial: &EulerState1D,
    kernel: &Kernel,
    checkpoints: &[f64],
    cfl: f64,
) -> Result<EulerRun, EulerError> {
    if !(cfl > 0.0 && cfl <= MAX_CFL) {
        return Err(EulerError::Parameters(format!("cfl must lie in (0, {MAX_CFL}], got {cfl}")));
    }
    if checkpoints.iter().any(|t| !(t.is_finite() && *t >= initial.t)) || checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(EulerError::Parameters("checkpoint times must be finite, increasing and not before the start".into()));
    }
    initial.density()?;
    // Explicit alignment source: keep dt * sup K well inside the stability region.
    let source_dt = 0.5 / kernel.kcal();
    let mut state = initial.clone();
    let mut run = EulerRun {
        checkpoints: Vec::new(),
        diagnostics: vec![state.diagnostics()],
        halted: None,
    };
    for &target in checkpoints {
        while state.t < target {
            let dt = cfl_dt(&state, cfl).min(source_dt).min(target - state.t);
            let next = match euler_step(&state, kernel, dt) {
                Ok(s) => s,
                Err(EulerError::Shock { t, dt, min_dudx, .. }) => {
                    run.halted = Some(ShockDiagnostic { t, dt, min_dudx });
                    return Ok(run);
                }
                Err(e) => return Err(e),
            };
            state = next;
            if target - state.t <= 1e-12 * target.abs().max(1.0) {
                state.t = target;
            }
            run.diagnostics.push(state.diagnostics());
        }
        run.checkpoints.push(state.clone());
    }
    Ok(run)
}

/// L1 distance between a coarse density and a fine one averaged onto the
/// coarse cells (the fine grid must refine the coarse one by an integer factor).
pub fn restricted_l1(coarse: &EulerState1D, fine: &EulerState1D) -> Result<f64, EulerError> {
    let (nc, nf) = (coarse.cells(), fine.cells());
    if nf % nc != 0 || coarse.x_min != fine.x_min || coarse.x_max != fine.x_max {
        return Err(EulerError::Parameters(format!("grid of {nf} cells does not refine {nc} cells")));
    }
    let f = nf / nc;
    Ok((0..nc)
        .map(|k| {
            let avg = fine.rho[k * f..(k + 1) * f].iter().sum::<f64>() / f as f64;
            (coarse.rho[k] - avg).abs()
        })
        .sum::<f64>()
        * coarse.dx())
}

/// Observable `Phi(x, v)` compared between particles and fluid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Observable {
    /// `Phi = tanh(x + v)`.
    Tanh,
    /// `Phi = v`.
    Velocity,
}

impl Observable {
    pub fn eval(&self, x: f64, v: f64) -> f64 {
        match self {
            Observable::Tanh => (x + v).tanh(),
            Observable::Velocity => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerCompareParams {
    pub density: Marginal,
    pub u0: VelocityProfile,
    pub kernel: Kernel,
    pub x_min: f64,
    pub x_max: f64,
    pub grid_cells: usize,
    pub eps_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub t_final: f64,
    /// Particle time step.
    pub dt: f64,
    /// Particle frames between checkpoints.
    pub checkpoint_stride: usize,
    pub cfl: f64,
    pub trials: usize,
    pub rng_seed: u64,
    pub observable: Observable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub epsilon: f64,
    pub n: usize,
    pub trial: usize,
    pub t: f64,
    pub w1_spatial: f64,
    pub observable_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonAxes {
    pub epsilon: Vec<f64>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub t: Vec<f64>,
}

/// Trial means indexed `[epsilon][N][t]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonValues {
    pub w1_spatial: Vec<Vec<Vec<f64>>>,
    pub observable_error: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerComparison {
    pub axes: ComparisonAxes,
    pub values: ComparisonValues,
    /// `sqrt(C_1(N)) + epsilon^{1/4}`, indexed `[epsilon][N]`.
    pub reference_curve: Vec<Vec<f64>>,
    pub euler_diagnostics: Vec<Diagnostics>,
    pub halted: Option<ShockDiagnostic>,
    #[serde(skip)]
    pub rows: Vec<ComparisonRow>,
    #[serde(skip)]
    pub euler_states: Vec<EulerState1D>,
}

impl EulerCompareParams {
    pub fn validate(&self) -> Result<(), EulerError> {
        let bad = |m: &str| Err(EulerError::Parameters(m.to_string()));
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad("eps_list must be non-empty with non-negative entries");
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad("n_list must be non-empty with positive entries");
        }
        if self.grid_cells == 0 || self.trials == 0 || self.checkpoint_stride == 0 {
            return bad("grid_cells, trials and checkpoint_stride must be positive");
        }
        let (lo, hi) = self.density.bounds();
        if !(self.x_min <= lo && hi <= self.x_max) {
            return bad("grid domain must contain the support of the initial density");
        }
        self.density.validate()?;
        self.u0.validate()?;
        Ok(())
    }
}

/// Mollified monokinetic particles against the grid solution, per `(epsilon, N, trial)`.
///
/// Particles start from the grid's initial density, so at `t = 0` the spatial
/// `W1` is pure sampling error. Seeds depend on `(trial, N)` only: every
/// `epsilon` shares the same base points.
pub fn euler_vs_particles(p: &EulerCompareParams) -> Result<EulerComparison, EulerError> {
    p.validate()?;
    let initial = EulerState1D::from_profiles(p.x_min, p.x_max, p.grid_cells, &p.density, &p.u0)?;
    let rho0 = initial.density()?;
    let particle_times = crate::dynamics::step_times(p.dt, p.t_final)?;
    let last = particle_times.len() - 1;
    let frame_steps: Vec<usize> = (0..=last).filter(|k| k % p.checkpoint_stride == 0 || *k == last).collect();
    let times: Vec<f64> = frame_steps.iter().map(|&k| particle_times[k]).collect();

    let euler = euler_solve_checkpoints(&initial, &p.kernel, &times, p.cfl)?;
    let reached = euler.checkpoints.len();
    let times = times[..reached].to_vec();
    let fluid: Vec<(GridDensity1D, f64)> = euler
        .checkpoints
        .iter()
        .map(|s| {
            let dx = s.dx();
            let obs = (0..s.cells()).map(|k| s.rho[k] * p.observable.eval(s.center(k), s.u[k])).sum::<f64>() * dx;
            Ok((s.density()?, obs))
        })
        .collect::<Result<_, EulerError>>()?;
    let t_stop = *times.last().unwrap();

    let mut cells = Vec::new();
    for (ei, &eps) in p.eps_list.iter().enumerate() {
        for (ni, &n) in p.n_list.iter().enumerate() {
            for trial in 0..p.trials {
                cells.push((ei, eps, ni, n, trial));
            }
        }
    }
    let per_cell: Vec<Vec<ComparisonRow>> = cells
        .par_iter()
        .map(|&(_, eps, ni, n, trial)| -> Result<Vec<ComparisonRow>, EulerError> {
            let seed = derive_seed(p.rng_seed, trial as u64, ni as u64);
            let z = monokinetic_sample(&rho0, &p.u0, eps, n, seed)?;
            let sim = simulate(&z, &p.kernel, p.dt, t_stop, p.checkpoint_stride)?;
            let mut rows = Vec::with_capacity(times.len());
            for (k, &t) in times.iter().enumerate() {
                let frame = sim
                    .frames
                    .iter()
                    .find(|f| (f.t - t).abs() <= 1e-12 * t.max(1.0))
                    .ok_or_else(|| EulerError::Parameters(format!("no particle frame at t = {t}")))?;
                let e = &frame.ensemble;
                let w1 = wasserstein1_1d(&EmpiricalMeasure::spatial(e), &fluid[k].0)?;
                let obs = (0..n).map(|i| p.observable.eval(e.positions()[i], e.velocities()[i])).sum::<f64>() / n as f64;
                rows.push(ComparisonRow {
                    epsilon: eps,
                    n,
                    trial,
                    t,
                    w1_spatial: w1,
                    observable_error: (obs - fluid[k].1).abs(),
                });
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<ComparisonRow> = per_cell.into_iter().flatten().collect();

    let mean = |ei: usize, ni: usize, k: usize, f: &dyn Fn(&ComparisonRow) -> f64| -> f64 {
        let eps = p.eps_list[ei];
        let n = p.n_list[ni];
        let t = times[k];
        let sel: Vec<f64> = rows.iter().filter(|r| r.epsilon == eps && r.n == n && r.t == t).map(f).collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    let grid = |f: &dyn Fn(&ComparisonRow) -> f64| -> Vec<Vec<Vec<f64>>> {
        (0..p.eps_list.len())
            .map(|ei| (0..p.n_list.len()).map(|ni| (0..times.len()).map(|k| mean(ei, ni, k, f)).collect()).collect())
            .collect()
    };
    let values = ComparisonValues {
        w1_spatial: grid(&|r| r.w1_spatial),
        observable_error: grid(&|r| r.observable_error),
    };
    let reference_curve = p
        .eps_list
        .iter()
        .map(|&eps| {
            p.n_list
                .iter()
                .map(|&n| fournier_rate(n.max(2), 1).map(|c| c.sqrt() + eps.powf(0.25)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(EulerComparison {
        axes: ComparisonAxes {
            epsilon: p.eps_list.clone(),
            n: p.n_list.clone(),
            t: times,
        },
        values,
        reference_curve,
        euler_diagnostics: euler.diagnostics,
        halted: euler.halted,
        rows,
        euler_states: euler.checkpoints,
    })
}

/// Long CSV `epsilon,N,trial,t,w1_spatial,observable_error`.
pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "N", "trial", "t", "w1_spatial", "observable_error"])?;
    for r in rows {
        w.write_record(&[
            r.epsilon.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            r.t.to_string(),
            r.w1_spatial.to_string(),
            r.observable_error.to_string(),
        ])?;
    }
    w.flush()
}
