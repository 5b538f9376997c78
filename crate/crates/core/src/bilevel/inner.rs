//! Lower-level value function.
//!
//! The lower problem is searched over a family of feedback policies: at each
//! step the control is the feasible value closest to a piecewise-constant
//! bias, where feasible means the catching-up correction stays within the
//! cap. The bias (and the initial point when it is free) is optimized by
//! compass search from low-discrepancy starts.

use crate::bilevel::search::{coordinate_directions, compass_search, halton_point, CompassOptions};
use crate::bilevel::BilevelError;
use crate::dynamics::{
    catchup_step, integrate_upper, ControlProfile, ControlSetSpec, InitialState, Participant, Scenario, TimeGrid,
};
use crate::linalg::{Mat2, Vec2};
use crate::real::Real;

/// Settings of the inner search.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerOptions<T> {
    pub starts: usize,
    /// Number of constant pieces of the bias.
    pub bias_cells: usize,
    pub search: CompassOptions<T>,
}

impl<T: Real> Default for InnerOptions<T> {
    fn default() -> Self {
        Self {
            starts: 8,
            bias_cells: 8,
            search: CompassOptions { initial_fraction: T::lit(0.25), min_fraction: T::lit(1e-3), max_evals: 400 },
        }
    }
}

/// Minimizer of the lower problem found by the search.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution<T> {
    pub phi: T,
    pub x0: Vec2<T>,
    /// Flat controls, `dim` entries per cell.
    pub u: Vec<T>,
    pub dim: usize,
    /// Population path on the grid nodes.
    pub path: Vec<Vec2<T>>,
}

/// Problem data of one participant's lower level along a fixed disk path.
pub(crate) struct LowerProblem<'a, T> {
    pub p: &'a Participant<T>,
    pub radius: T,
    pub y: &'a [Vec2<T>],
    pub h: T,
}

impl<'a, T: Real> LowerProblem<'a, T> {
    pub fn cells(&self) -> usize {
        self.y.len() - 1
    }

    /// Feasible control closest to `bias` for one step from `x` (None if no
    /// control keeps the correction within the cap).
    pub fn step_control(&self, x: Vec2<T>, k: usize, bias: &[T]) -> Option<Vec<T>> {
        let p = self.p;
        let h = self.h;
        let rho = self.radius + h * p.cap;
        let a = x + p.drift.base(x) * h - self.y[k + 1];
        match p.drift.control_dim() {
            1 => {
                let g = p.drift.column(x, 0) * h;
                let (lo, hi) = scalar_bounds(&p.u_set);
                let (flo, fhi) = quadratic_feasible_interval(a, g, rho)?;
                let slack = T::lit(1e-12) * (T::one() + lo.abs().max(hi.abs()));
                let l = lo.max(flo);
                let u = hi.min(fhi);
                if l > u + slack {
                    return None;
                }
                let u_hi = u.max(l);
                Some(vec![bias[0].clamp_to(l, u_hi)])
            }
            _ => {
                let hm = Mat2::new(
                    p.drift.column(x, 0).x * h,
                    p.drift.column(x, 1).x * h,
                    p.drift.column(x, 0).y * h,
                    p.drift.column(x, 1).y * h,
                );
                let u = project_intersection(&p.u_set, a, hm, rho, bias);
                let r = a + hm.mul_vec(Vec2::new(u[0], u[1]));
                let tol = T::lit(1e-10) * (T::one() + rho);
                (r.norm() <= rho + tol && p.u_set.distance(&u) <= tol).then_some(u)
            }
        }
    }

    /// Runs the bias policy; returns the cost, and fills `u_out`/`path_out` when given.
    pub fn run_policy(
        &self,
        x0: Vec2<T>,
        bias: &[T],
        bias_cells: usize,
        mut u_out: Option<&mut Vec<T>>,
        mut path_out: Option<&mut Vec<Vec2<T>>>,
    ) -> Option<T> {
        let m = self.p.drift.control_dim();
        let k_total = self.cells();
        let mut x = x0;
        let mut cost = T::zero();
        if let Some(pth) = path_out.as_deref_mut() {
            pth.clear();
            pth.push(x);
        }
        if let Some(u) = u_out.as_deref_mut() {
            u.clear();
        }
        for k in 0..k_total {
            let b = (k * bias_cells) / k_total;
            let uk = self.step_control(x, k, &bias[b * m..(b + 1) * m])?;
            let dx = self.p.drift.eval(x, &uk) * self.h;
            x = catchup_step(x, dx, self.y[k + 1], self.radius, self.h).next;
            cost = cost + uk.iter().map(|&v| v * v).sum::<T>() * self.h;
            if let Some(u) = u_out.as_deref_mut() {
                u.extend_from_slice(&uk);
            }
            if let Some(pth) = path_out.as_deref_mut() {
                pth.push(x);
            }
        }
        Some(cost)
    }
}

fn scalar_bounds<T: Real>(set: &ControlSetSpec<T>) -> (T, T) {
    let (lo, hi) = set.bounding_box();
    (lo[0], hi[0])
}

/// `{u : ‖a + g u‖ ≤ ρ}` as an interval (None if empty).
fn quadratic_feasible_interval<T: Real>(a: Vec2<T>, g: Vec2<T>, rho: T) -> Option<(T, T)> {
    let qa = g.norm_sq();
    let qb = a.dot(g);
    let qc = a.norm_sq() - rho * rho;
    if qa <= T::min_positive_value().sqrt() * (T::one() + a.norm_sq()) * T::epsilon() {
        return (qc <= T::zero()).then(|| (T::neg_infinity(), T::infinity()));
    }
    let disc = qb * qb - qa * qc;
    if disc < T::zero() {
        return None;
    }
    let sq = disc.sqrt();
    // Stable roots of qa u² + 2 qb u + qc.
    let q = -(qb + qb.signum() * sq);
    let (r1, r2) = if q != T::zero() { (q / qa, qc / q) } else { (T::zero(), T::zero()) };
    Some((r1.min(r2), r1.max(r2)))
}

/// Projection of `p` onto `{u : ‖a + H u‖ ≤ ρ}`.
fn project_ellipsoid<T: Real>(a: Vec2<T>, hm: Mat2<T>, rho: T, p: Vec2<T>) -> Vec2<T> {
    if (a + hm.mul_vec(p)).norm() <= rho {
        return p;
    }
    let hth = hm.transpose().mul_mat(hm);
    let hta = hm.transpose().mul_vec(a);
    let solve = |lam: T| {
        let m = Mat2::identity() + hth.scaled(lam);
        m.solve(p - hta * lam).unwrap_or(p)
    };
    let (mut lo, mut hi) = (T::zero(), T::one());
    while (a + hm.mul_vec(solve(hi))).norm() > rho && hi < T::lit(1e15) {
        lo = hi;
        hi = hi * T::lit(10.0);
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if (a + hm.mul_vec(solve(mid))).norm() > rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    solve(hi)
}

/// Dykstra's alternating projections onto `U ∩ E`.
fn project_intersection<T: Real>(set: &ControlSetSpec<T>, a: Vec2<T>, hm: Mat2<T>, rho: T, bias: &[T]) -> Vec<T> {
    let mut x = Vec2::new(bias[0], bias[1]);
    let (mut p, mut q) = (Vec2::zero(), Vec2::zero());
    for _ in 0..500 {
        let yv = set.project(&[x.x + p.x, x.y + p.y]);
        let y = Vec2::new(yv[0], yv[1]);
        p = x + p - y;
        let xn = project_ellipsoid(a, hm, rho, y + q);
        q = y + q - xn;
        let done = (xn - x).norm() <= T::epsilon() * T::lit(16.0) * (T::one() + x.norm());
        x = xn;
        if done {
            break;
        }
    }
    set.project(&[x.x, x.y])
}

fn map_x0<T: Real>(y0: Vec2<T>, radius: T, offset: Vec2<T>) -> Vec2<T> {
    let n = offset.norm();
    if n <= radius {
        y0 + offset
    } else {
        y0 + offset * (radius / n)
    }
}

/// Value function of participant `i` along the disk path produced by its
/// upper control `v_i` (a single-participant planar profile).
pub fn value_function<T: Real>(
    scenario: &Scenario<T>,
    i: usize,
    v_i: &ControlProfile<T>,
    opts: &InnerOptions<T>,
) -> Result<InnerSolution<T>, BilevelError> {
    let p = scenario.participants.get(i).ok_or(BilevelError::Participant(i))?;
    let single = Scenario { radius: scenario.radius, horizon: scenario.horizon, participants: vec![p.clone()] };
    let y = integrate_upper(&single, v_i)?;
    value_function_on_path(scenario, i, &y.path(0), v_i.grid, opts)
}

/// Value function of participant `i` along a given disk path (grid nodes).
pub fn value_function_on_path<T: Real>(
    scenario: &Scenario<T>,
    i: usize,
    y: &[Vec2<T>],
    grid: TimeGrid<T>,
    opts: &InnerOptions<T>,
) -> Result<InnerSolution<T>, BilevelError> {
    let p = scenario.participants.get(i).ok_or(BilevelError::Participant(i))?;
    if y.len() != grid.nodes() {
        return Err(BilevelError::Dimension(format!("path has {} nodes, grid has {}", y.len(), grid.nodes())));
    }
    let prob = LowerProblem { p, radius: scenario.radius, y, h: grid.h() };
    let m = p.drift.control_dim();
    let kb = opts.bias_cells.max(1).min(grid.cells);
    let free = matches!(p.x0, InitialState::Free);
    let nb = kb * m;
    let dim = nb + if free { 2 } else { 0 };
    let (ulo, uhi) = p.u_set.bounding_box();
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for _ in 0..kb {
        lo.extend_from_slice(&ulo);
        hi.extend_from_slice(&uhi);
    }
    if free {
        lo.extend_from_slice(&[-scenario.radius, -scenario.radius]);
        hi.extend_from_slice(&[scenario.radius, scenario.radius]);
    }
    let x0_of = |params: &[T]| match p.x0 {
        InitialState::Fixed(x) => x,
        InitialState::Free => map_x0(y[0], scenario.radius, Vec2::new(params[nb], params[nb + 1])),
    };
    let objective = |params: &[T]| {
        let bias = project_bias(&p.u_set, &params[..nb], m);
        prob.run_policy(x0_of(params), &bias, kb, None, None).unwrap_or(T::infinity())
    };
    let dirs = coordinate_directions::<T>(dim);
    let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
    for s in 0..opts.starts.max(1) {
        let start = inner_start(&p.u_set, s, kb, m, &lo, &hi, free);
        let res = compass_search(objective, &start, &lo, &hi, &dirs, &opts.search);
        if !res.value.is_finite() {
            continue;
        }
        let bias = project_bias(&p.u_set, &res.x[..nb], m);
        let mut u = Vec::new();
        prob.run_policy(x0_of(&res.x), &bias, kb, Some(&mut u), None);
        let better = match &best {
            None => true,
            Some((v, bu, _)) => res.value < *v || (res.value == *v && lex_less(&u, bu)),
        };
        if better {
            best = Some((res.value, u, res.x));
        }
    }
    let (phi, u, params) = best.ok_or(BilevelError::Infeasible { participant: i })?;
    let x0 = x0_of(&params);
    let bias = project_bias(&p.u_set, &params[..nb], m);
    let mut path = Vec::new();
    prob.run_policy(x0, &bias, kb, None, Some(&mut path));
    Ok(InnerSolution { phi, x0, u, dim: m, path })
}

/// Quick feasibility probe of the lower level along a disk path: tries the
/// least-effort, largest-effort and a few low-discrepancy bias policies.
pub fn lower_feasible<T: Real>(scenario: &Scenario<T>, i: usize, y: &[Vec2<T>], grid: TimeGrid<T>, probes: usize) -> bool {
    let p = &scenario.participants[i];
    let prob = LowerProblem { p, radius: scenario.radius, y, h: grid.h() };
    let m = p.drift.control_dim();
    let (lo, hi) = p.u_set.bounding_box();
    let x0 = match p.x0 {
        InitialState::Fixed(x) => x,
        InitialState::Free => y[0],
    };
    (0..probes.max(1)).any(|s| {
        let start = inner_start(&p.u_set, s, 1, m, &lo, &hi, false);
        let bias = project_bias(&p.u_set, &start, m);
        prob.run_policy(x0, &bias, 1, None, None).is_some()
    })
}

fn project_bias<T: Real>(set: &ControlSetSpec<T>, raw: &[T], m: usize) -> Vec<T> {
    raw.chunks(m).flat_map(|c| set.project(c)).collect()
}

/// Start `s`: least-effort bias, then largest bias, then Halton points.
fn inner_start<T: Real>(set: &ControlSetSpec<T>, s: usize, kb: usize, m: usize, lo: &[T], hi: &[T], free: bool) -> Vec<T> {
    let dim = lo.len();
    let mut out = vec![T::zero(); dim];
    match s {
        0 => {
            let base = set.least_norm_point();
            for c in 0..kb {
                out[c * m..(c + 1) * m].copy_from_slice(&base);
            }
        }
        1 => {
            let base = set.support_point(&vec![T::one(); m]);
            for c in 0..kb {
                out[c * m..(c + 1) * m].copy_from_slice(&base);
            }
        }
        _ => {
            let pt = halton_point(s as u64 - 1, dim);
            for j in 0..dim {
                out[j] = lo[j] + (hi[j] - lo[j]) * T::lit(pt[j]);
            }
            return out;
        }
    }
    if free {
        for j in kb * m..dim {
            out[j] = T::zero();
        }
    }
    out
}

fn lex_less<T: Real>(a: &[T], b: &[T]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    a.len() < b.len()
}
