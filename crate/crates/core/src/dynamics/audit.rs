//! Constraint audits, cost functionals and truncation-cap bounds.

use crate::dynamics::profile::{ControlProfile, Trajectory};
use crate::dynamics::scenario::Scenario;
use crate::dynamics::DynamicsError;
use crate::linalg::Vec2;
use crate::real::Real;

/// Reporting tolerance for constraint violations.
pub const REPORT_TOL: f64 = 1e-6;

/// Worst violation of one constraint family.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Violation<T> {
    pub amount: T,
    pub time: T,
    pub participant: Option<usize>,
    /// Second participant for pairwise constraints.
    pub other: Option<usize>,
}

impl<T: Real> Violation<T> {
    fn record(&mut self, amount: T, time: T, participant: usize, other: Option<usize>) {
        if amount > self.amount {
            *self = Self { amount, time, participant: Some(participant), other };
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FeasibilityReport<T> {
    /// `2R − ‖y^i − y^j‖`.
    pub non_overlap: Violation<T>,
    /// `‖x^i − y^i‖ − R`.
    pub confinement: Violation<T>,
    pub u_membership: Violation<T>,
    pub v_membership: Violation<T>,
    /// Correction magnitude above the cap.
    pub truncation: Violation<T>,
}

impl<T: Real> FeasibilityReport<T> {
    pub fn max_violation(&self) -> T {
        [self.non_overlap, self.confinement, self.u_membership, self.v_membership, self.truncation]
            .iter()
            .fold(T::zero(), |m, v| m.max(v.amount))
    }

    pub fn is_feasible(&self, tol: T) -> bool {
        self.max_violation() <= tol
    }
}

/// Audits non-overlap, confinement, control membership and truncation on the grid.
pub fn check_feasibility<T: Real>(
    scenario: &Scenario<T>,
    y: &Trajectory<T>,
    x: &Trajectory<T>,
    u: &ControlProfile<T>,
    v: &ControlProfile<T>,
) -> Result<FeasibilityReport<T>, DynamicsError> {
    let n = scenario.n();
    let grid = y.grid;
    if x.grid != grid || u.grid.cells != grid.cells || v.grid.cells != grid.cells {
        return Err(DynamicsError::Grid("audit requires matching grids".into()));
    }
    if y.n != n || x.n != n || u.n() != n || v.n() != n {
        return Err(DynamicsError::Dimension(format!("expected {n} participants")));
    }
    let mut rep = FeasibilityReport::default();
    let two_r = scenario.radius * T::lit(2.0);
    for k in 0..grid.nodes() {
        let t = grid.t(k);
        for i in 0..n {
            for j in i + 1..n {
                let d = (y.at(k, i) - y.at(k, j)).norm();
                rep.non_overlap.record(two_r - d, t, i, Some(j));
            }
            let off = (x.at(k, i) - y.at(k, i)).norm();
            rep.confinement.record(off - scenario.radius, t, i, None);
        }
    }
    for k in 0..grid.cells {
        let t = grid.t(k);
        for (i, p) in scenario.participants.iter().enumerate() {
            rep.u_membership.record(p.u_set.distance(u.get(i, k)), t, i, None);
            rep.v_membership.record(p.v_set.distance(v.get(i, k)), t, i, None);
            rep.truncation.record(x.correction(k, i).norm() - p.cap, grid.t(k + 1), i, None);
        }
    }
    Ok(rep)
}

/// `½ Σ ‖y^i(T)‖²`.
pub fn cost_upper<T: Real>(y_terminal: &[Vec2<T>]) -> T {
    y_terminal.iter().map(|y| y.norm_sq()).sum::<T>() * T::lit(0.5)
}

/// `Σ_k h ‖u_k‖²` for participant `i` (exact for piecewise-constant controls).
pub fn cost_lower<T: Real>(u: &ControlProfile<T>, i: usize) -> T {
    let h = u.grid.h();
    u.values[i].iter().map(|&v| v * v).sum::<T>() * h
}

/// Lower cost of every participant.
pub fn cost_lower_all<T: Real>(u: &ControlProfile<T>) -> Vec<T> {
    (0..u.n()).map(|i| cost_lower(u, i)).collect()
}

/// A population position on the boundary of its disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactSample<T> {
    pub participant: usize,
    pub x: Vec2<T>,
    pub y: Vec2<T>,
}

/// Cap bracket `(m̄, M̄)` for one participant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H5Bounds<T> {
    /// `min_ζ { max_u ⟨ζ, f⟩ − min_v ⟨ζ, v⟩ }`.
    pub upper: T,
    /// `max_ζ { min_u ⟨ζ, f⟩ − max_v ⟨ζ, v⟩ }`.
    pub lower: T,
    pub samples: usize,
}

impl<T: Real> H5Bounds<T> {
    /// `m̄ < M < M̄`.
    pub fn brackets(&self, cap: T) -> bool {
        self.lower < cap && cap < self.upper
    }
}

/// Evaluates the cap bounds with `ζ` ranging over the outward normals of the
/// supplied contact samples. The inner optimizations over `U` and `V` are
/// linear programs solved through support functions.
pub fn h5_bounds<T: Real>(
    scenario: &Scenario<T>,
    samples: &[ContactSample<T>],
) -> Result<Vec<Option<H5Bounds<T>>>, DynamicsError> {
    if samples.is_empty() {
        return Err(DynamicsError::EmptySamples);
    }
    let mut out: Vec<Option<H5Bounds<T>>> = vec![None; scenario.n()];
    for s in samples {
        let p = scenario
            .participants
            .get(s.participant)
            .ok_or_else(|| DynamicsError::Dimension(format!("sample refers to participant {}", s.participant)))?;
        let zeta = (s.x - s.y).normalized().ok_or(DynamicsError::InfeasiblePoint {
            participant: s.participant,
            time: f64::NAN,
            distance: 0.0,
            radius: scenario.radius.to_f64_lossy(),
        })?;
        let f0 = p.drift.base(s.x).dot(zeta);
        let g = p.drift.control_gradient(s.x, zeta);
        let neg_g: Vec<T> = g.iter().map(|&v| -v).collect();
        let max_u = f0 + p.u_set.support(&g);
        let min_u = f0 - p.u_set.support(&neg_g);
        let max_v = p.v_set.support(&[zeta.x, zeta.y]);
        let min_v = -p.v_set.support(&[-zeta.x, -zeta.y]);
        let a = max_u - min_v;
        let b = min_u - max_v;
        let e = out[s.participant].get_or_insert(H5Bounds { upper: a, lower: b, samples: 0 });
        e.upper = e.upper.min(a);
        e.lower = e.lower.max(b);
        e.samples += 1;
    }
    Ok(out)
}

/// Contact samples at every node where a population touches its disk boundary.
pub fn contact_samples<T: Real>(y: &Trajectory<T>, x: &Trajectory<T>) -> Vec<ContactSample<T>> {
    let mut out = Vec::new();
    for k in 0..x.grid.nodes() {
        for i in 0..x.n {
            if x.in_contact(k, i) {
                out.push(ContactSample { participant: i, x: x.at(k, i), y: y.at(k, i) });
            }
        }
    }
    out
}
