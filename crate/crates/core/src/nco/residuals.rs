//! Grid residuals of the adjoint system, boundary conditions, maximum
//! conditions and the lower-level relation.
//!
//! Cell `k` pairs drift data at the left node (`x_k`, `u_k`, `v_k`) with
//! costates and contact geometry at the right node `k+1`, and uses the cell
//! value of each step multiplier.

use crate::bilevel::BilevelSolution;
use crate::dynamics::{ControlSetSpec, Scenario};
use crate::geometry::{contact_jacobian, sigma_subgradient, SigmaSubgradient};
use crate::linalg::{Mat2, Vec2};
use crate::nco::hamiltonian::{control_sup, pair_weighted};
use crate::nco::{LowerMultipliers, LowerWitness, NcoError, UpperMultipliers, REP_TOL};
use crate::real::Real;

/// Solution data shared by the residual routines.
pub(crate) struct Frame<'a, T> {
    pub scenario: &'a Scenario<T>,
    pub sol: &'a BilevelSolution<T>,
    pub n: usize,
    pub cells: usize,
    pub h: T,
}

impl<'a, T: Real> Frame<'a, T> {
    pub fn new(scenario: &'a Scenario<T>, sol: &'a BilevelSolution<T>) -> Result<Self, NcoError> {
        let n = scenario.n();
        if sol.y.n != n || sol.x.n != n || sol.u.n() != n || sol.v.n() != n {
            return Err(NcoError::Dimension(format!("solution must cover {n} participants")));
        }
        Ok(Self { scenario, sol, n, cells: sol.y.grid.cells, h: sol.y.grid.h() })
    }

    #[inline]
    pub fn z(&self, k: usize, i: usize) -> Vec2<T> {
        self.sol.x.at(k, i) - self.sol.y.at(k, i)
    }

    pub fn centers(&self, k: usize) -> Vec<Vec2<T>> {
        (0..self.n).map(|i| self.sol.y.at(k, i)).collect()
    }

    /// Boundary contact of the population at node `k`.
    pub fn contact(&self, k: usize, i: usize) -> bool {
        self.sol.x.in_contact(k, i)
    }

    /// Contact up to the reporting tolerance (used for constancy checks).
    pub fn rep_active(&self, k: usize, i: usize) -> bool {
        self.scenario.radius - self.z(k, i).norm() <= T::lit(REP_TOL)
    }

    pub fn pair_rep_active(&self, k: usize, i: usize, j: usize) -> bool {
        let d = (self.sol.y.at(k, i) - self.sol.y.at(k, j)).norm();
        d - self.scenario.radius * T::lit(2.0) <= T::lit(REP_TOL)
    }

    pub fn f(&self, k: usize, i: usize) -> Vec2<T> {
        self.scenario.participants[i].drift.eval(self.sol.x.at(k, i), self.sol.u.get(i, k))
    }

    pub fn xi_fraction(&self, k: usize, i: usize) -> T {
        self.sol.x.correction(k, i).norm() / self.scenario.participants[i].cap
    }

    /// `Σ_j w_j d^{ij} v` at node `k`, with `v` the participant's control on cell `k`.
    pub fn pair_curvature(&self, k: usize, i: usize, weight: impl Fn(usize) -> T) -> Result<Vec2<T>, NcoError> {
        let mut acc = Vec2::zero();
        let vi = self.sol.v.vec2(i, k);
        for j in 0..self.n {
            if j == i {
                continue;
            }
            let w = weight(j);
            if w != T::zero() {
                let d: Mat2<T> = contact_jacobian(self.sol.y.at(k + 1, i), self.sol.y.at(k + 1, j))?;
                acc += d.mul_vec(vi) * w;
            }
        }
        Ok(acc)
    }

    /// Distance from `w` to the normal cone of `D + y0^i` at `x(0)`.
    pub fn initial_cone_distance(&self, i: usize, w: Vec2<T>) -> T {
        let z = self.z(0, i);
        if !self.contact(0, i) {
            return w.norm();
        }
        let n = match z.normalized() {
            Some(n) => n,
            None => return w.norm(),
        };
        let s = w.dot(n);
        if s >= T::zero() {
            (w - n * s).norm()
        } else {
            w.norm()
        }
    }

    pub fn x0_free(&self, i: usize) -> bool {
        matches!(self.scenario.participants[i].x0, crate::dynamics::InitialState::Free)
    }
}

/// Affine pieces of the upper adjoint right-hand side on one cell:
/// `RHS_L(θ) = a_l + θ g`, `RHS_H(θ) = a_h − θ g`.
pub(crate) struct UpperRhs<T> {
    pub a_l: Vec2<T>,
    pub a_h: Vec2<T>,
    pub sub: SigmaSubgradient<T>,
}

pub(crate) fn upper_rhs<T: Real>(
    fr: &Frame<'_, T>,
    m: &UpperMultipliers<T>,
    q_l_next: Vec2<T>,
    k: usize,
    i: usize,
) -> Result<UpperRhs<T>, NcoError> {
    let p = &fr.scenario.participants[i];
    let nu = m.nu_l[i][k];
    let z = fr.z(k + 1, i);
    let w = q_l_next - z * nu;
    let u = fr.sol.u.get(i, k);
    let f = fr.f(k, i);
    let v = fr.sol.v.vec2(i, k);
    let jac = p.drift.jac_x(u);
    let sub = sigma_subgradient(z, q_l_next, nu, p.cap, fr.contact(k + 1, i));
    let a_l = jac.transpose().mul_vec(w) - f * nu + v * nu;
    let a_h = v * (-nu) + f * nu + fr.pair_curvature(k, i, |j| m.nu_h.get(i, j, k))?;
    Ok(UpperRhs { a_l, a_h, sub })
}

/// Worst residuals of the two adjoint inclusions (checked jointly per cell).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdjointResidual<T> {
    pub q_l: T,
    pub q_h: T,
    /// Cells where the contact direction was undefined.
    pub degenerate_steps: usize,
}

/// Distance of the backward differences of `(q_L, q_H)` to the right-hand
/// side selections, minimized over the Clarke interval at kinks.
pub fn adjoint_residual<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    m: &UpperMultipliers<T>,
) -> Result<AdjointResidual<T>, NcoError> {
    let fr = Frame::new(scenario, sol)?;
    m.check_shape(&sol.y.grid, fr.n)?;
    let mut out = AdjointResidual::<T>::default();
    for k in 0..fr.cells {
        for i in 0..fr.n {
            let rhs = upper_rhs(&fr, m, m.q_l(k + 1, i), k, i)?;
            if rhs.sub.degenerate {
                out.degenerate_steps += 1;
            }
            let lhs_l = (m.q_l(k + 1, i) - m.q_l(k, i)) * (-T::one() / fr.h);
            let lhs_h = (m.q_h(k + 1, i) - m.q_h(k, i)) * (-T::one() / fr.h);
            let a = lhs_l - rhs.a_l;
            let b = lhs_h - rhs.a_h;
            let g = rhs.sub.grad;
            let gg = g.norm_sq();
            let theta = if gg > T::zero() { g.dot(a - b) / (gg * T::lit(2.0)) } else { T::zero() };
            let theta = theta.clamp_to(rhs.sub.theta_lo, rhs.sub.theta_hi);
            out.q_l = out.q_l.max((a - g * theta).norm());
            out.q_h = out.q_h.max((b + g * theta).norm());
        }
    }
    Ok(out)
}

/// Terminal conditions on `(q_H, q_L)`, plus the initial condition on `q_L`
/// for participants whose initial point is free.
pub fn boundary_residual<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    m: &UpperMultipliers<T>,
) -> Result<T, NcoError> {
    let fr = Frame::new(scenario, sol)?;
    m.check_shape(&sol.y.grid, fr.n)?;
    let kt = fr.cells;
    let yt = fr.centers(kt);
    let (mut r_h, mut r_l, mut r_0) = (T::zero(), T::zero(), T::zero());
    for i in 0..fr.n {
        let z = fr.z(kt, i);
        let nu = m.nu_l[i][kt];
        let base = m.q_h(kt, i) + yt[i] * m.lambda + z * nu;
        let e = pair_weighted(&yt, i, base, |j| m.nu_h.get(i, j, kt))?;
        r_h = r_h + e.norm_sq();
        r_l = r_l + (m.q_l(kt, i) - z * nu).norm_sq();
        if fr.x0_free(i) {
            let w = m.q_l(0, i) - fr.z(0, i) * m.nu_l[i][0];
            r_0 = r_0 + fr.initial_cone_distance(i, w).powi(2);
        }
    }
    Ok(r_h.sqrt().max(r_l.sqrt()).max(r_0.sqrt()))
}

/// Per-cell gap between the supremum of the lower-level control map and its
/// value at the candidate control; the map is separable so the gaps of the
/// participants add up.
pub fn max_condition_lower<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    m: &UpperMultipliers<T>,
) -> Result<Vec<T>, NcoError> {
    let fr = Frame::new(scenario, sol)?;
    m.check_shape(&sol.y.grid, fr.n)?;
    let mut gaps = vec![T::zero(); fr.cells];
    for (k, gap) in gaps.iter_mut().enumerate() {
        for (i, p) in scenario.participants.iter().enumerate() {
            let w = m.q_l(k + 1, i) - fr.z(k + 1, i) * m.nu_l[i][k];
            let x = sol.x.at(k, i);
            let u = sol.u.get(i, k);
            let sup = control_sup(&p.drift, &p.u_set, x, w, m.alpha[i]).value;
            let at = w.dot(p.drift.eval(x, u)) - m.alpha[i] * u.iter().map(|&a| a * a).sum::<T>();
            *gap = *gap + (sup - at).max(T::zero());
        }
    }
    Ok(gaps)
}

/// Where the value-function subgradients in the upper maximum condition come from.
#[derive(Clone, Copy, Debug)]
pub enum SubgradientSource<'a, T> {
    /// The `ζ` paths carried by lower witnesses, falling back to their
    /// stored central-difference estimates.
    Witness(&'a LowerMultipliers<T>),
    /// Central-difference estimates, one path per participant.
    FiniteDifference(&'a [Vec<Vec2<T>>]),
}

fn full_plane<T: Real>(set: &ControlSetSpec<T>, v: &[T]) -> bool {
    let one = T::one();
    let z = T::zero();
    [[one, z], [-one, z], [z, one], [z, -one]].iter().all(|w| set.normal_cone_distance(v, w) == T::zero())
}

/// Componentwise distance of `α^i ζ^i − (q_H^i + ν_L^i z^i + Σ_j ν_H^{ij} e^{ij})`
/// to the normal cone of `V^i` at `v^i`.
pub fn max_condition_upper<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    m: &UpperMultipliers<T>,
    source: SubgradientSource<'_, T>,
) -> Result<T, NcoError> {
    let fr = Frame::new(scenario, sol)?;
    m.check_shape(&sol.y.grid, fr.n)?;
    let mut worst = T::zero();
    for (i, p) in scenario.participants.iter().enumerate() {
        let zeta: Option<&[Vec2<T>]> = match source {
            SubgradientSource::Witness(lower) => lower
                .witnesses
                .get(i)
                .and_then(|w| w.zeta.as_deref())
                .or_else(|| lower.fd_subgradient.as_ref().and_then(|f| f.get(i)).map(|v| v.as_slice())),
            SubgradientSource::FiniteDifference(paths) => paths.get(i).map(|v| v.as_slice()),
        };
        if let Some(z) = zeta {
            if z.len() != fr.cells {
                return Err(NcoError::Dimension("subgradient path must hold one value per cell".into()));
            }
        }
        for k in 0..fr.cells {
            let y = fr.centers(k + 1);
            let base = m.q_h(k + 1, i) + fr.z(k + 1, i) * m.nu_l[i][k];
            let lhs = pair_weighted(&y, i, base, |j| m.nu_h.get(i, j, k))?;
            let v = sol.v.get(i, k);
            let target = if m.alpha[i] == T::zero() {
                -lhs
            } else {
                match zeta {
                    Some(z) => z[k] * m.alpha[i] - lhs,
                    None if full_plane(&p.v_set, v) => -lhs,
                    None => return Err(NcoError::IndeterminateWitness { participant: i }),
                }
            };
            worst = worst.max(p.v_set.normal_cone_distance(v, &[target.x, target.y]));
        }
    }
    Ok(worst)
}

fn step_path_violation<T: Real>(path: &[T], active: impl Fn(usize) -> bool) -> T {
    let mut worst = path.iter().fold(T::zero(), |m, &v| m.max(-v));
    for k in 0..path.len().saturating_sub(1) {
        let jump = path[k + 1] - path[k];
        worst = worst.max(jump);
        if jump != T::zero() && !active(k + 1) {
            worst = worst.max(jump.abs());
        }
    }
    worst
}

/// Sign, monotonicity and constancy violations of the upper step multipliers.
pub fn monotonicity_residual<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    m: &UpperMultipliers<T>,
) -> Result<T, NcoError> {
    let fr = Frame::new(scenario, sol)?;
    m.check_shape(&sol.y.grid, fr.n)?;
    let mut worst = T::zero();
    for i in 0..fr.n {
        worst = worst.max(step_path_violation(&m.nu_l[i], |k| fr.rep_active(k, i)));
    }
    for (i, j) in m.nu_h.pairs() {
        if let Some(path) = m.nu_h.path(i, j) {
            worst = worst.max(step_path_violation(path, |k| fr.pair_rep_active(k, i, j)));
        }
    }
    Ok(worst)
}

/// Residuals of one participant's lower-level relation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LowerResiduals<T> {
    pub monotonicity: T,
    /// State and costate inclusion, distance to the convexified selection set.
    pub inclusion: T,
    /// Subgradient relation against the normal cone of `V^i`.
    pub subgradient: T,
    pub boundary: T,
    pub degenerate_steps: usize,
}

/// Affine residual of the lower inclusion on one cell as a function of the
/// selected control `û` and cone weight `θ`.
pub(crate) struct LowerCell<'a, T> {
    pub fr: &'a Frame<'a, T>,
    pub i: usize,
    pub k: usize,
    pub mu: T,
    pub w: Vec2<T>,
    pub n: Vec2<T>,
    pub sub: SigmaSubgradient<T>,
    pub pair: Vec2<T>,
}

impl<'a, T: Real> LowerCell<'a, T> {
    pub fn new(fr: &'a Frame<'a, T>, wit: &LowerWitness<T>, p_l_next: Vec2<T>, i: usize, k: usize) -> Result<Self, NcoError> {
        let p = &fr.scenario.participants[i];
        let mu = wit.mu_l[k];
        let z = fr.z(k + 1, i);
        let w = p_l_next - z * mu;
        let sub = sigma_subgradient(z, p_l_next, mu, p.cap, fr.contact(k + 1, i));
        let n = z.normalized().unwrap_or_else(Vec2::zero);
        let pair = fr.pair_curvature(k, i, |j| if j == i { T::zero() } else { wit.mu_h[j][k] })?;
        Ok(Self { fr, i, k, mu, w, n, sub, pair })
    }

    /// `(ẋ − f(x,û) + θ M n, rhs_pL, rhs_pH)` for the given selection.
    pub fn parts(&self, u: &[T], theta: T) -> (Vec2<T>, Vec2<T>, Vec2<T>) {
        let fr = self.fr;
        let p = &fr.scenario.participants[self.i];
        let x = fr.sol.x.at(self.k, self.i);
        let xdot = (fr.sol.x.at(self.k + 1, self.i) - x) * (T::one() / fr.h);
        let f = p.drift.eval(x, u);
        let v = fr.sol.v.vec2(self.i, self.k);
        let r_x = xdot - (f - self.n * (theta * p.cap));
        let g = self.sub.grad * theta;
        let rhs_l = v * self.mu + g + p.drift.jac_x(u).transpose().mul_vec(self.w) - f * self.mu;
        let rhs_h = v * (-self.mu) - g + f * self.mu + self.pair;
        (r_x, rhs_l, rhs_h)
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when it is numerically singular.
fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
    let eps = T::epsilon() * T::lit(1e3) * scale;
    for c in 0..n {
        let piv = (c..n).max_by(|&r, &s| a[r][c].abs().partial_cmp(&a[s][c].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if !(a[piv][c].abs() > eps) {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] = a[r][k] - f * a[c][k];
            }
            b[r] = b[r] - f * b[c];
        }
    }
    let mut x = vec![T::zero(); n];
    for c in (0..n).rev() {
        let s: T = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

/// Minimizes `‖r0 + Σ_j x_j cols_j‖` over the box `lo ≤ x ≤ hi` exactly, by
/// enumerating which coordinates sit at a bound (meant for a handful of
/// variables).
pub(crate) fn box_least_squares<T: Real>(r0: &[T], cols: &[Vec<T>], lo: &[T], hi: &[T]) -> (Vec<T>, T) {
    let nv = cols.len();
    let eval = |x: &[T]| -> T {
        r0.iter()
            .enumerate()
            .map(|(row, &b)| {
                let v = b + (0..nv).map(|j| cols[j][row] * x[j]).sum::<T>();
                v * v
            })
            .sum::<T>()
            .sqrt()
    };
    let mut best_x: Vec<T> = (0..nv).map(|j| T::zero().clamp_to(lo[j], hi[j])).collect();
    let mut best = eval(&best_x);
    let combos = 3usize.pow(nv as u32);
    for code in 0..combos {
        // Digit 0: free, 1: at lower bound, 2: at upper bound.
        let mut x = vec![T::zero(); nv];
        let mut free = Vec::new();
        let mut c = code;
        for j in 0..nv {
            match c % 3 {
                0 if hi[j] > lo[j] => free.push(j),
                0 | 1 => x[j] = lo[j],
                _ => x[j] = hi[j],
            }
            c /= 3;
        }
        if !free.is_empty() {
            let rhs: Vec<T> = r0
                .iter()
                .enumerate()
                .map(|(row, &b)| b + (0..nv).filter(|j| !free.contains(j)).map(|j| cols[j][row] * x[j]).sum::<T>())
                .collect();
            let a: Vec<Vec<T>> = free
                .iter()
                .map(|&p| free.iter().map(|&q| cols[p].iter().zip(&cols[q]).map(|(u, v)| *u * *v).sum()).collect())
                .collect();
            let b: Vec<T> = free.iter().map(|&p| -cols[p].iter().zip(&rhs).map(|(u, v)| *u * *v).sum::<T>()).collect();
            let Some(sol) = solve_dense(a, b) else { continue };
            let slack = T::epsilon() * T::lit(64.0);
            let ok = free.iter().zip(&sol).all(|(&j, &v)| {
                let w = (hi[j] - lo[j]).abs().max(T::one()) * slack;
                v >= lo[j] - w && v <= hi[j] + w
            });
            if !ok {
                continue;
            }
            for (&j, &v) in free.iter().zip(&sol) {
                x[j] = v.clamp_to(lo[j], hi[j]);
            }
        }
        let r = eval(&x);
        if r < best {
            best = r;
            best_x = x;
        }
    }
    (best_x, best)
}

/// Minimizes `‖r(û, θ)‖` for an affine `r` over `û ∈ face` and
/// `θ ∈ [θ_lo, θ_hi]`. Returns the minimizer and the residual norm.
pub(crate) fn min_affine_over_face<T: Real>(
    r: impl Fn(&[T], T) -> Vec<T>,
    face: &ControlSetSpec<T>,
    theta_range: (T, T),
    start: (&[T], T),
) -> (Vec<T>, T, T) {
    let norm = |v: &[T]| v.iter().map(|&a| a * a).sum::<T>().sqrt();
    let u0 = face.project(start.0);
    let th0 = start.1.clamp_to(theta_range.0, theta_range.1);
    let r_start = norm(&r(&u0, th0));
    if r_start == T::zero() {
        return (u0, th0, r_start);
    }
    // Face coordinates: the box itself, or the signed position along a segment.
    let (map, mut lo, mut hi): (Box<dyn Fn(&[T]) -> Vec<T>>, Vec<T>, Vec<T>) = match face {
        ControlSetSpec::Interval { lo, hi } => (Box::new(|s: &[T]| s.to_vec()), lo.clone(), hi.clone()),
        ControlSetSpec::Segment { direction, halflength } => {
            let d = *direction;
            (Box::new(move |s: &[T]| vec![s[0] * d.x, s[0] * d.y]), vec![-*halflength], vec![*halflength])
        }
        ControlSetSpec::Ball { .. } => {
            // Not a box: keep the projected start.
            return (u0, th0, r_start);
        }
    };
    lo.push(theta_range.0);
    hi.push(theta_range.1);
    let nv = lo.len();
    let at = |s: &[T]| r(&map(&s[..nv - 1]), s[nv - 1]);
    let zero = vec![T::zero(); nv];
    let r0 = at(&zero);
    let cols: Vec<Vec<T>> = (0..nv)
        .map(|j| {
            let mut e = zero.clone();
            e[j] = T::one();
            at(&e).iter().zip(&r0).map(|(a, b)| *a - *b).collect()
        })
        .collect();
    let (s, _) = box_least_squares(&r0, &cols, &lo, &hi);
    let u = map(&s[..nv - 1]);
    let th = s[nv - 1];
    let res = norm(&r(&u, th));
    if res <= r_start {
        (u, th, res)
    } else {
        (u0, th0, r_start)
    }
}

/// Residuals of the lower-level relation of participant `i` for `wit`.
pub fn lower_relation<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    i: usize,
    wit: &LowerWitness<T>,
) -> Result<LowerResiduals<T>, NcoError> {
    let fr = Frame::new(scenario, sol)?;
    let p = scenario.participants.get(i).ok_or(NcoError::Participant(i))?;
    let nodes = sol.y.grid.nodes();
    if wit.p_h.len() != nodes || wit.p_l.len() != nodes || wit.mu_l.len() != nodes || wit.mu_h.len() != fr.n {
        return Err(NcoError::Dimension("lower witness does not match the solution grid".into()));
    }
    let mut out = LowerResiduals::<T>::default();
    out.monotonicity = step_path_violation(&wit.mu_l, |k| fr.rep_active(k, i));
    for j in 0..fr.n {
        if j != i {
            out.monotonicity = out.monotonicity.max(step_path_violation(&wit.mu_h[j], |k| fr.pair_rep_active(k, i, j)));
        }
    }
    for k in 0..fr.cells {
        let cell = LowerCell::new(&fr, wit, wit.p_l[k + 1], i, k)?;
        if cell.sub.degenerate {
            out.degenerate_steps += 1;
        }
        let lhs_l = (wit.p_l[k + 1] - wit.p_l[k]) * (-T::one() / fr.h);
        let lhs_h = (wit.p_h[k + 1] - wit.p_h[k]) * (-T::one() / fr.h);
        let ydot = (sol.y.at(k + 1, i) - sol.y.at(k, i)) * (T::one() / fr.h) - sol.v.vec2(i, k);
        let face = control_sup(&p.drift, &p.u_set, sol.x.at(k, i), cell.w, wit.lambda_bar).face;
        let r = |u: &[T], th: T| {
            let (rx, rl, rh) = cell.parts(u, th);
            let a = lhs_l - rl;
            let b = lhs_h - rh;
            vec![rx.x, rx.y, a.x, a.y, b.x, b.y, ydot.x, ydot.y]
        };
        let (_, _, dist) = min_affine_over_face(
            r,
            &face,
            (cell.sub.theta_lo, cell.sub.theta_hi),
            (sol.u.get(i, k), fr.xi_fraction(k, i)),
        );
        out.inclusion = out.inclusion.max(dist);

        let y = fr.centers(k + 1);
        let mut lead = wit.p_h[k + 1] + fr.z(k + 1, i) * wit.mu_l[k];
        if let Some(z) = &wit.zeta {
            lead += z[k] * wit.lambda_bar;
        }
        let lead = pair_weighted(&y, i, lead, |j| wit.mu_h[j][k])?;
        out.subgradient = out.subgradient.max(p.v_set.normal_cone_distance(sol.v.get(i, k), &[-lead.x, -lead.y]));
    }
    let kt = fr.cells;
    let yt = fr.centers(kt);
    let zt = fr.z(kt, i);
    let mut b = (wit.p_l[kt] - zt * wit.mu_l[kt]).norm();
    let term = pair_weighted(&yt, i, wit.p_h[kt] + zt * wit.mu_l[kt], |j| wit.mu_h[j][kt])?;
    b = b.max(term.norm());
    if fr.x0_free(i) {
        b = b.max(fr.initial_cone_distance(i, wit.p_l[0] - fr.z(0, i) * wit.mu_l[0]));
    }
    out.boundary = b;
    Ok(out)
}
