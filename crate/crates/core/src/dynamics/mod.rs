//! Scenarios, integrators, audits and cost functionals.

mod audit;
mod control;
mod integrate;
mod profile;
mod scenario;

pub use audit::{
    check_feasibility, contact_samples, cost_lower, cost_lower_all, cost_upper, h5_bounds, ContactSample,
    FeasibilityReport, H5Bounds, Violation, REPORT_TOL,
};
pub use control::{ControlSetSpec, DriftSpec};
pub use integrate::{
    catchup_step, integrate_lower_catchup, integrate_lower_penalty, integrate_upper, penalty_field, penalty_substeps,
    truncation_tol, CatchupStep,
};
pub use profile::{ControlProfile, TimeGrid, Trajectory};
pub use scenario::{twodisk_scenario, InitialState, Participant, Scenario};


use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid scenario: {invariant} violated ({detail})")]
    InvalidScenario { invariant: &'static str, detail: String },
    #[error("participant {participant}: control at t = {time} lies {distance} outside its set")]
    InfeasibleControl { participant: usize, time: f64, distance: f64 },
    #[error("participant {participant}: point at distance {distance} from the disk center exceeds R = {radius} (t = {time})")]
    InfeasiblePoint { participant: usize, time: f64, distance: f64, radius: f64 },
    #[error("participant {participant}: correction {magnitude} at t = {time} exceeds the truncation cap {cap}")]
    TruncationViolation { participant: usize, time: f64, magnitude: f64, cap: f64 },
    #[error("unstable penalty integration: {0}")]
    Stability(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("no boundary contact samples supplied")]
    EmptySamples,
}
