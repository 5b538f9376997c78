//! Forward integrators for the disk translation ODE and the sweeping inclusion.

use crate::dynamics::profile::{ControlProfile, TimeGrid, Trajectory};
use crate::dynamics::scenario::Scenario;
use crate::dynamics::DynamicsError;
use crate::geometry::ACTIVE_REL_TOL;
use crate::linalg::Vec2;
use crate::real::Real;

/// Relative slack allowed on the truncation cap before a step is rejected.
/// The correction divides a rounded position difference by `h`, so single
/// precision needs a much wider margin than its epsilon.
pub fn truncation_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1024.0))
}

/// Relative slack for control-set membership of supplied profiles.
fn membership_tol<T: Real>(extent: T) -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0)) * (T::one() + extent)
}

/// Result of one catching-up step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatchupStep<T> {
    pub next: Vec2<T>,
    /// `(unprojected − projected) / h`.
    pub correction: Vec2<T>,
    pub active: bool,
}

/// Moves `x` by the drift increment `dx` and projects onto the disk of
/// `radius` centered at `center_next`.
#[inline]
pub fn catchup_step<T: Real>(x: Vec2<T>, dx: Vec2<T>, center_next: Vec2<T>, radius: T, h: T) -> CatchupStep<T> {
    let w = x + dx;
    let off = w - center_next;
    let d = off.norm();
    let eps = T::lit(ACTIVE_REL_TOL) * radius;
    if d > radius {
        let next = center_next + off * (radius / d);
        CatchupStep { next, correction: (w - next) * (T::one() / h), active: true }
    } else {
        CatchupStep { next: w, correction: Vec2::zero(), active: d >= radius - eps }
    }
}

fn check_grid<T: Real>(a: &TimeGrid<T>, b: &TimeGrid<T>) -> Result<(), DynamicsError> {
    let same = a.cells == b.cells && (a.horizon - b.horizon).abs() <= T::lit(1e-12) * a.horizon;
    if same {
        Ok(())
    } else {
        Err(DynamicsError::Grid(format!(
            "grids differ: K = {} on [0, {}] vs K = {} on [0, {}]",
            a.cells, a.horizon, b.cells, b.horizon
        )))
    }
}

fn check_horizon<T: Real>(scenario: &Scenario<T>, grid: &TimeGrid<T>) -> Result<(), DynamicsError> {
    if ((grid.horizon - scenario.horizon) / scenario.horizon).abs() > T::lit(1e-9) {
        return Err(DynamicsError::Grid(format!("grid horizon {} differs from T = {}", grid.horizon, scenario.horizon)));
    }
    Ok(())
}

/// `ẏ = v`: exact integration of piecewise-constant upper controls.
pub fn integrate_upper<T: Real>(scenario: &Scenario<T>, v: &ControlProfile<T>) -> Result<Trajectory<T>, DynamicsError> {
    let n = scenario.n();
    let grid = v.grid;
    check_horizon(scenario, &grid)?;
    if v.n() != n || v.dims.iter().any(|&m| m != 2) {
        return Err(DynamicsError::Dimension(format!("upper profile must hold {n} planar controls")));
    }
    for (i, p) in scenario.participants.iter().enumerate() {
        let tol = membership_tol(p.v_set.extent());
        for k in 0..grid.cells {
            let d = p.v_set.distance(v.get(i, k));
            if !(d <= tol) {
                return Err(DynamicsError::InfeasibleControl { participant: i, time: grid.t(k).to_f64_lossy(), distance: d.to_f64_lossy() });
            }
        }
    }
    let h = grid.h();
    let mut traj = Trajectory::new(grid, n);
    for (i, p) in scenario.participants.iter().enumerate() {
        traj.positions[i] = p.y0;
    }
    for k in 0..grid.cells {
        for i in 0..n {
            traj.positions[(k + 1) * n + i] = traj.positions[k * n + i] + v.vec2(i, k) * h;
        }
    }
    mark_pair_contacts(scenario.radius, &mut traj);
    Ok(traj)
}

/// Flags nodes where a disk touches another disk.
fn mark_pair_contacts<T: Real>(radius: T, traj: &mut Trajectory<T>) {
    let n = traj.n;
    let two_r = radius * T::lit(2.0);
    let eps = T::lit(ACTIVE_REL_TOL) * two_r;
    for k in 0..traj.grid.nodes() {
        for i in 0..n {
            for j in i + 1..n {
                if (traj.at(k, i) - traj.at(k, j)).norm() <= two_r + eps {
                    traj.contact[k * n + i] = true;
                    traj.contact[k * n + j] = true;
                }
            }
        }
    }
}

fn check_lower_inputs<T: Real>(
    scenario: &Scenario<T>,
    y: &Trajectory<T>,
    u: &ControlProfile<T>,
    x0: &[Vec2<T>],
) -> Result<(), DynamicsError> {
    let n = scenario.n();
    check_horizon(scenario, &y.grid)?;
    check_grid(&y.grid, &u.grid)?;
    if y.n != n || u.n() != n || x0.len() != n {
        return Err(DynamicsError::Dimension(format!("expected {n} participants in y, u and x0")));
    }
    for (i, p) in scenario.participants.iter().enumerate() {
        if u.dims[i] != p.drift.control_dim() {
            return Err(DynamicsError::Dimension(format!(
                "participant {i}: profile has {} controls, drift expects {}",
                u.dims[i],
                p.drift.control_dim()
            )));
        }
        let tol = membership_tol(p.u_set.extent());
        for k in 0..u.grid.cells {
            let d = p.u_set.distance(u.get(i, k));
            if !(d <= tol) {
                return Err(DynamicsError::InfeasibleControl { participant: i, time: u.grid.t(k).to_f64_lossy(), distance: d.to_f64_lossy() });
            }
        }
        let off = (x0[i] - y.at(0, i)).norm();
        if !(off <= scenario.radius * (T::one() + T::lit(ACTIVE_REL_TOL))) {
            return Err(DynamicsError::InfeasiblePoint {
                participant: i,
                time: 0.0,
                distance: off.to_f64_lossy(),
                radius: scenario.radius.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Catching-up scheme `x_{k+1} = P_{D+y_{k+1}}(x_k + h f(x_k, u_k))`.
///
/// The correction implied by each projection must stay within the
/// participant's cap; exceeding it is an error rather than a clamp.
pub fn integrate_lower_catchup<T: Real>(
    scenario: &Scenario<T>,
    y: &Trajectory<T>,
    u: &ControlProfile<T>,
    x0: &[Vec2<T>],
) -> Result<Trajectory<T>, DynamicsError> {
    check_lower_inputs(scenario, y, u, x0)?;
    let n = scenario.n();
    let grid = y.grid;
    let h = grid.h();
    let r = scenario.radius;
    let slack = T::one() + truncation_tol::<T>();
    let mut traj = Trajectory::new(grid, n);
    for i in 0..n {
        traj.positions[i] = x0[i];
        let d = (x0[i] - y.at(0, i)).norm();
        traj.contact[i] = d >= r * (T::one() - T::lit(ACTIVE_REL_TOL));
    }
    for k in 0..grid.cells {
        for (i, p) in scenario.participants.iter().enumerate() {
            let x = traj.positions[k * n + i];
            let dx = p.drift.eval(x, u.get(i, k)) * h;
            let step = catchup_step(x, dx, y.at(k + 1, i), r, h);
            let mag = step.correction.norm();
            if mag > p.cap * slack {
                return Err(DynamicsError::TruncationViolation {
                    participant: i,
                    time: grid.t(k + 1).to_f64_lossy(),
                    magnitude: mag.to_f64_lossy(),
                    cap: p.cap.to_f64_lossy(),
                });
            }
            traj.positions[(k + 1) * n + i] = step.next;
            traj.contact[(k + 1) * n + i] = step.active;
            traj.corrections[k * n + i] = step.correction;
        }
    }
    Ok(traj)
}

/// Smallest number of substeps per cell keeping the explicit penalty scheme stable.
pub fn penalty_substeps<T: Real>(h: T, stiffness: T) -> usize {
    (h * stiffness * T::lit(2.0)).ceil().to_usize().unwrap_or(1).max(1)
}

/// Lipschitz field replacing the truncated cone:
/// `min(k·max(0, ‖z‖ − R(1−δ)), M)·z/‖z‖` with `δ = 1/√k`.
#[inline]
pub fn penalty_field<T: Real>(offset: Vec2<T>, radius: T, cap: T, stiffness: T) -> Vec2<T> {
    let d = offset.norm();
    let delta = T::one() / stiffness.sqrt();
    let excess = d - radius * (T::one() - delta);
    if excess <= T::zero() || d <= T::zero() {
        return Vec2::zero();
    }
    offset * ((stiffness * excess).min(cap) / d)
}

/// Explicit Euler integration of `ẋ = f(x, u) − g_k(x − y)` with `y`
/// interpolated linearly between nodes and `substeps` steps per cell.
pub fn integrate_lower_penalty<T: Real>(
    scenario: &Scenario<T>,
    y: &Trajectory<T>,
    u: &ControlProfile<T>,
    x0: &[Vec2<T>],
    stiffness: T,
    substeps: usize,
) -> Result<Trajectory<T>, DynamicsError> {
    check_lower_inputs(scenario, y, u, x0)?;
    if !(stiffness > T::zero()) || substeps == 0 {
        return Err(DynamicsError::Stability(format!("stiffness {stiffness} and substeps {substeps} must be positive")));
    }
    let n = scenario.n();
    let grid = y.grid;
    let h = grid.h();
    let dt = h / T::from_count(substeps);
    if dt * stiffness * T::lit(2.0) > T::one() + T::lit(1e-12) {
        return Err(DynamicsError::Stability(format!(
            "step {dt} exceeds 1/(2k) = {} for stiffness {stiffness}",
            T::one() / (stiffness * T::lit(2.0))
        )));
    }
    let r = scenario.radius;
    let mut traj = Trajectory::new(grid, n);
    for i in 0..n {
        traj.positions[i] = x0[i];
    }
    for (i, p) in scenario.participants.iter().enumerate() {
        let mut x = x0[i];
        traj.contact[i] = penalty_field(x - y.at(0, i), r, p.cap, stiffness).norm() > T::zero();
        for k in 0..grid.cells {
            let uk = u.get(i, k);
            let (ya, yb) = (y.at(k, i), y.at(k + 1, i));
            let mut g = Vec2::zero();
            for s in 0..substeps {
                let frac = T::from_count(s) / T::from_count(substeps);
                let yc = ya + (yb - ya) * frac;
                g = penalty_field(x - yc, r, p.cap, stiffness);
                x = x + (p.drift.eval(x, uk) - g) * dt;
            }
            traj.positions[(k + 1) * n + i] = x;
            traj.corrections[k * n + i] = g;
            traj.contact[(k + 1) * n + i] = penalty_field(x - yb, r, p.cap, stiffness).norm() > T::zero();
        }
    }
    Ok(traj)
}
