//! Mean-field force, initial data, and the coupled particle / mean-field
//! construction behind the propagation-of-chaos experiment.

mod chaos;
mod datum;
mod force;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::measures::MeasureError;

pub use chaos::{chaos_experiment, write_chaos_csv, ChaosParams, ChaosRunResult, TrialSeries};
pub use datum::{
    mollified_monokinetic_sample, monokinetic_sample, sample_iid, InitialDatum, Marginal, MollifierSpec,
    VelocityProfile,
};
pub use force::{advect_in_reference_field, mean_field_force, ReferenceField};

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error("invalid initial datum: {0}")]
    Datum(String),
    #[error("reference trajectory: {0}")]
    Frames(String),
    #[error("invalid experiment parameters: {0}")]
    Parameters(String),
    #[error("non-finite test particle state at t = {0}")]
    NonFinite(f64),
    #[error("work budget {budget} cannot cover a single trial ({per_trial} units)")]
    Budget { budget: u64, per_trial: u64 },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
