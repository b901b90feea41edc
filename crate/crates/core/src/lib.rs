//! Topological Cucker-Smale flocking: agent dynamics, mean-field forces,
//! probability metrics, a 1D pressureless Euler alignment solver and the
//! seeded experiment harness that ties them together.

pub mod dynamics;
pub mod ensemble;
pub mod euler1d;
pub mod experiments;
pub mod kernel;
pub mod meanfield;
pub mod measures;
pub mod neighbors;
pub mod seeding;

pub use dynamics::{rank_profile, simulate, step_rk4, topological_rhs, Frame, RankProfile, Simulation, Summary};
pub use ensemble::{ParticleEnsemble, SupportBox};
pub use kernel::Kernel;
