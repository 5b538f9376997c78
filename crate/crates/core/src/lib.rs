//! Controlled sweeping processes for groups of disk-confined crowds.
//!
//! The crate covers four layers:
//!
//! * [`geometry`]: disks, truncated normal cones, projections and the
//!   algebraic kernels of the optimality system.
//! * [`dynamics`]: scenarios, the upper-level translation ODE, the
//!   catching-up and penalty integrators for the sweeping inclusion,
//!   feasibility audits, costs and truncation bounds.
//! * [`bilevel`]: lower-level value functions, the flattened direct solver and
//!   the closed-form two-disk reference solution.
//! * [`nco`]: Hamiltonians, residuals of the maximum principle and a
//!   multiplier fitter.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double-precision instantiations.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bilevel;
pub mod dynamics;
pub mod geometry;
pub mod linalg;
pub mod nco;
pub mod real;

pub use linalg::{Mat2, Vec2};
pub use real::Real;

use thiserror::Error;

/// Any error raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Bilevel(#[from] bilevel::BilevelError),
    #[error(transparent)]
    Nco(#[from] nco::NcoError),
}

pub type Vec2d = Vec2<f64>;
pub type Mat2d = Mat2<f64>;
pub type Scenario64 = dynamics::Scenario<f64>;
pub type Participant64 = dynamics::Participant<f64>;
pub type TimeGrid64 = dynamics::TimeGrid<f64>;
pub type ControlProfile64 = dynamics::ControlProfile<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type BilevelSolution64 = bilevel::BilevelSolution<f64>;
pub type CaseStudyParams64 = bilevel::CaseStudyParams<f64>;
pub type UpperMultipliers64 = nco::UpperMultipliers<f64>;
pub type LowerMultipliers64 = nco::LowerMultipliers<f64>;
pub type NcoReport64 = nco::NcoReport<f64>;
