//! Bilevel solvers: lower-level value function, penalized direct search and
//! the closed-form two-disk reference solution.

mod direct;
mod inner;
pub mod search;
mod twodisk;

pub use direct::{penalized_objective, solve_bilevel_direct, DirectOptions};
pub use inner::{lower_feasible, value_function, value_function_on_path, InnerOptions, InnerSolution};
pub use twodisk::{closed_form_controls, solve_twodisk_parametric, CaseStudyParams};

use crate::dynamics::{
    check_feasibility, cost_lower_all, cost_upper, integrate_lower_catchup, integrate_upper, ControlProfile,
    DynamicsError, FeasibilityReport, Scenario, Trajectory,
};
use crate::linalg::Vec2;
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BilevelError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("participant {participant}: no feasible lower-level control found")]
    Infeasible { participant: usize },
    #[error("no feasible upper-level start found")]
    NoFeasibleStart,
    #[error("scenario outside the two-disk family: {0}")]
    UnsupportedFamily(String),
    #[error("no participant {0}")]
    Participant(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Direct,
    Parametric,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Parametric => "parametric",
        }
    }
}

/// Paired upper/lower controls with their trajectories, costs and audit.
#[derive(Clone, Debug, PartialEq)]
pub struct BilevelSolution<T> {
    pub v: ControlProfile<T>,
    pub u: ControlProfile<T>,
    pub x0: Vec<Vec2<T>>,
    pub y: Trajectory<T>,
    pub x: Trajectory<T>,
    pub j_h: T,
    pub j_l: Vec<T>,
    pub method: Method,
    pub audit: FeasibilityReport<T>,
    /// Penalized objective when the solver evaluated it.
    pub penalized: Option<T>,
}

impl<T: Real> BilevelSolution<T> {
    /// Simulates the controls with the catching-up scheme and fills costs and audit.
    pub fn assemble(
        scenario: &Scenario<T>,
        v: ControlProfile<T>,
        u: ControlProfile<T>,
        x0: Vec<Vec2<T>>,
        method: Method,
    ) -> Result<Self, BilevelError> {
        let y = integrate_upper(scenario, &v)?;
        let x = integrate_lower_catchup(scenario, &y, &u, &x0)?;
        let audit = check_feasibility(scenario, &y, &x, &u, &v)?;
        let j_h = cost_upper(&y.terminal());
        let j_l = cost_lower_all(&u);
        Ok(Self { v, u, x0, y, x, j_h, j_l, method, audit, penalized: None })
    }
}
