//! Closed-form reference solution of the two-disk evacuation family.
//!
//! Two contacting disks sit on a ray through the exit, the leading one at
//! distance `L` with unit direction `v̂` and the trailing one `2R` further out.
//! Both move rigidly toward the exit. The populations stay at rest until
//! they touch the trailing edge at `t_a`; from then on the lower controls
//! hold them on the boundary with a full-cap correction. After `t_b` the
//! leading population saturates (`u = 1`) and the disks slow down so that
//! the populations keep up.

use crate::bilevel::search::golden_section;
use crate::bilevel::{BilevelError, BilevelSolution, Method};
use crate::dynamics::{catchup_step, ControlProfile, ControlSetSpec, DriftSpec, InitialState, Scenario, TimeGrid};
use crate::linalg::Vec2;
use crate::real::Real;

/// Switching times and speed of the two-disk solution, plus the family data
/// needed to evaluate it in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseStudyParams<T> {
    /// First boundary contact of the populations.
    pub t_a: T,
    /// Start of the saturated arc of the leading population.
    pub t_b: T,
    /// Cruise speed on `[0, t_b]`.
    pub v_bar: T,
    /// Unit vector from the exit toward the disks.
    pub direction: Vec2<T>,
    /// Drift rate `k` (`f = −k·u·x`).
    pub rate: T,
    pub cap: T,
    pub radius: T,
    pub horizon: T,
    /// Initial distance of the leading center from the exit.
    pub lead_distance: T,
    pub lead: usize,
    pub trail: usize,
}

impl<T: Real> CaseStudyParams<T> {
    fn from_t_b(t_b: T, base: &FamilyData<T>) -> Self {
        let k = base.rate;
        let v_bar = (k * (base.lead_distance + base.radius) + base.cap) / (k * t_b + T::one());
        Self {
            t_a: base.radius / v_bar,
            t_b,
            v_bar,
            direction: base.direction,
            rate: k,
            cap: base.cap,
            radius: base.radius,
            horizon: base.horizon,
            lead_distance: base.lead_distance,
            lead: base.lead,
            trail: base.trail,
        }
    }

    /// Coefficients `(a, b)` of the linear piece `γ = a + b·t` on `[t_a, t_b]`.
    pub fn gamma_linear(&self) -> (T, T) {
        (self.lead_distance + self.radius, -self.v_bar)
    }

    /// Coefficients `(c, k, d)` of the exponential piece `γ = c·e^{−k(t−t_b)} + d` on `[t_b, T]`.
    pub fn gamma_exponential(&self) -> (T, T, T) {
        (self.v_bar / self.rate, self.rate, -self.cap / self.rate)
    }

    /// Distance of the leading population from the exit.
    pub fn gamma_lead(&self, t: T) -> T {
        if t <= self.t_a {
            self.lead_distance
        } else if t <= self.t_b {
            let (a, b) = self.gamma_linear();
            a + b * t
        } else {
            let (c, k, d) = self.gamma_exponential();
            c * (-k * (t - self.t_b)).exp() + d
        }
    }

    /// Speed of both disks toward the exit.
    pub fn speed(&self, t: T) -> T {
        if t <= self.t_b {
            self.v_bar
        } else {
            self.v_bar * (-self.rate * (t - self.t_b)).exp()
        }
    }

    /// Signed coordinate of the leading center along `v̂`.
    pub fn lead_center(&self, t: T) -> T {
        if t <= self.t_b {
            self.lead_distance - self.v_bar * t
        } else {
            let k = self.rate;
            self.lead_distance - self.v_bar * self.t_b - self.v_bar * (T::one() - (-k * (t - self.t_b)).exp()) / k
        }
    }

    /// Lower controls of the continuous solution at `t`, indexed by participant.
    pub fn lower_controls(&self, t: T) -> [T; 2] {
        let mut out = [T::zero(); 2];
        if t < self.t_a {
            return out;
        }
        let g = self.gamma_lead(t);
        let two_r = self.radius * T::lit(2.0);
        if t < self.t_b {
            let need = (self.v_bar - self.cap) / self.rate;
            out[self.lead] = need / g;
            out[self.trail] = need / (g + two_r);
        } else {
            out[self.lead] = T::one();
            out[self.trail] = g / (g + two_r);
        }
        out
    }

    /// Disk centers of the continuous solution at `t`, indexed by participant.
    pub fn centers(&self, t: T) -> Vec<Vec2<T>> {
        let c = self.lead_center(t);
        let mut out = vec![Vec2::zero(); 2];
        out[self.lead] = self.direction * c;
        out[self.trail] = self.direction * (c + self.radius * T::lit(2.0));
        out
    }

    /// Populations of the continuous solution at `t`, indexed by participant.
    pub fn populations(&self, t: T) -> Vec<Vec2<T>> {
        let g = self.gamma_lead(t);
        let mut out = vec![Vec2::zero(); 2];
        out[self.lead] = self.direction * g;
        out[self.trail] = self.direction * (g + self.radius * T::lit(2.0));
        out
    }

    /// Upper cost of the continuous solution.
    pub fn j_h(&self) -> T {
        self.centers(self.horizon).iter().map(|c| c.norm_sq()).sum::<T>() * T::lit(0.5)
    }
}

/// Validated family data shared by the 1-D search.
struct FamilyData<T> {
    direction: Vec2<T>,
    rate: T,
    cap: T,
    radius: T,
    horizon: T,
    lead_distance: T,
    lead: usize,
    trail: usize,
    halflength: T,
}

impl<T: Real> FamilyData<T> {
    /// Leading center coordinate at `T` as a function of `t_b`.
    fn terminal_lead(&self, t_b: T) -> T {
        let k = self.rate;
        let rm = self.radius + self.cap / k;
        -rm + (self.lead_distance + rm) * (-k * (self.horizon - t_b)).exp() / (k * t_b + T::one())
    }

    fn terminal_lead_derivative(&self, t_b: T) -> T {
        let k = self.rate;
        let rm = self.radius + self.cap / k;
        let den = k * t_b + T::one();
        (self.lead_distance + rm) * (-k * (self.horizon - t_b)).exp() * k * k * t_b / (den * den)
    }

    fn cost(&self, t_b: T) -> T {
        let g = self.terminal_lead(t_b);
        let g2 = g + self.radius * T::lit(2.0);
        (g * g + g2 * g2) * T::lit(0.5)
    }
}

fn family<T: Real>(scenario: &Scenario<T>) -> Result<FamilyData<T>, BilevelError> {
    let bad = |m: &str| Err(BilevelError::UnsupportedFamily(m.to_string()));
    if scenario.n() != 2 {
        return bad("exactly two participants required");
    }
    let r = scenario.radius;
    let ps = &scenario.participants;
    let rel = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
    let tol = rel * (T::one() + r);
    let lead = if ps[0].y0.norm() <= ps[1].y0.norm() { 0 } else { 1 };
    let trail = 1 - lead;
    let lead_distance = ps[lead].y0.norm();
    let direction = match ps[lead].y0.normalized() {
        Some(d) => d,
        None => return bad("leading disk centered at the exit"),
    };
    if (ps[trail].y0 - ps[lead].y0 - direction * (r * T::lit(2.0))).norm() > rel * T::lit(10.0) * (r + lead_distance) {
        return bad("disks must touch on the ray through the exit");
    }
    let rate = match ps[0].drift {
        DriftSpec::ScaledLinear { c } if c < T::zero() => -c,
        _ => return bad("drift must be scaled_linear with negative coefficient"),
    };
    let mut halflength = T::infinity();
    for p in ps {
        if p.x0 != InitialState::Fixed(p.y0) {
            return bad("initial populations must sit at the disk centers");
        }
        if p.drift != ps[0].drift {
            return bad("participants must share the drift");
        }
        match &p.u_set {
            ControlSetSpec::Interval { lo, hi }
                if lo.len() == 1 && lo[0] == T::zero() && hi[0] == T::one() => {}
            _ => return bad("lower controls must range over [0, 1]"),
        }
        match p.v_set {
            ControlSetSpec::Segment { direction: d, halflength: hl } if (d.dot(direction).abs() - T::one()).abs() <= tol => {
                halflength = halflength.min(hl);
            }
            _ => return bad("upper controls must be a segment along the line of centers"),
        }
        if p.cap != ps[0].cap {
            return bad("participants must share the cap");
        }
    }
    Ok(FamilyData {
        direction,
        rate,
        cap: ps[0].cap,
        radius: r,
        horizon: scenario.horizon,
        lead_distance,
        lead,
        trail,
        halflength,
    })
}

/// Solves the two-disk family: minimizes the upper cost over `t_b` and
/// rebuilds the controls on `grid`.
pub fn solve_twodisk_parametric<T: Real>(
    scenario: &Scenario<T>,
    grid: TimeGrid<T>,
) -> Result<(CaseStudyParams<T>, BilevelSolution<T>), BilevelError> {
    let fam = family(scenario)?;
    let horizon = fam.horizon;
    let mut t_b = golden_section(|t| fam.cost(t), T::zero(), horizon, T::lit(1e-6));
    // Stationarity of the cost in the terminal coordinate g is g = −R.
    let (lo, hi) = (t_b - T::lit(1e-6), t_b + T::lit(1e-6));
    for _ in 0..20 {
        let resid = fam.terminal_lead(t_b) + fam.radius;
        let d = fam.terminal_lead_derivative(t_b);
        if d <= T::zero() {
            break;
        }
        let next = t_b - resid / d;
        if !(next >= lo && next <= hi) {
            break;
        }
        let done = (next - t_b).abs() <= T::epsilon() * T::lit(4.0) * horizon;
        t_b = next;
        if done {
            break;
        }
    }
    let params = CaseStudyParams::from_t_b(t_b, &fam);
    if !(params.t_a > T::zero() && params.t_a < params.t_b && params.t_b < horizon) {
        return Err(BilevelError::UnsupportedFamily(format!(
            "switching times out of order: t_a = {}, t_b = {}",
            params.t_a, params.t_b
        )));
    }
    if params.v_bar > fam.halflength || params.v_bar <= fam.cap {
        return Err(BilevelError::UnsupportedFamily(format!(
            "cruise speed {} outside ({}, {}]",
            params.v_bar, fam.cap, fam.halflength
        )));
    }
    let (v, u) = closed_form_controls(scenario, &params, grid)?;
    let x0 = scenario.participants.iter().map(|p| p.y0).collect();
    let sol = BilevelSolution::assemble(scenario, v, u, x0, Method::Parametric)?;
    Ok((params, sol))
}

/// Piecewise-constant controls realizing the two-disk solution on `grid`.
///
/// The disk speed follows the closed form, evaluated in feedback form on the
/// simulated leading population after `t_b`; each lower control is chosen so
/// that the catching-up correction equals the cap once contact is made.
pub fn closed_form_controls<T: Real>(
    scenario: &Scenario<T>,
    params: &CaseStudyParams<T>,
    grid: TimeGrid<T>,
) -> Result<(ControlProfile<T>, ControlProfile<T>), BilevelError> {
    if scenario.n() != 2 {
        return Err(BilevelError::UnsupportedFamily("exactly two participants required".into()));
    }
    let h = grid.h();
    let dir = params.direction;
    let (k, m, r) = (params.rate, params.cap, scenario.radius);
    let hl = scenario
        .participants
        .iter()
        .map(|p| match p.v_set {
            ControlSetSpec::Segment { halflength, .. } => halflength,
            _ => T::infinity(),
        })
        .fold(T::infinity(), |a, b| a.min(b));
    let mut y: Vec<Vec2<T>> = scenario.participants.iter().map(|p| p.y0).collect();
    let mut x = y.clone();
    let mut v = ControlProfile::zeros(grid, &[2, 2]);
    let mut u = ControlProfile::zeros(grid, &[1, 1]);
    for c in 0..grid.cells {
        let (t0, t1) = (grid.t(c), grid.t(c + 1));
        let tail = k * x[params.lead].dot(dir) + m;
        let s = if t1 <= params.t_b {
            params.v_bar
        } else if t0 >= params.t_b {
            tail
        } else {
            let theta = (params.t_b - t0) / h;
            theta * params.v_bar + (T::one() - theta) * tail
        };
        let s = s.min(hl);
        let phase = ((t1 - params.t_a) / h).clamp_to(T::zero(), T::one());
        let need = phase * (s - m);
        let vk = dir * (-s);
        for i in 0..2 {
            let gamma = k * x[i].dot(dir);
            let ui = if need <= T::zero() {
                T::zero()
            } else if gamma <= need {
                T::one()
            } else {
                need / gamma
            };
            v.set(i, c, &[vk.x, vk.y]);
            u.set(i, c, &[ui]);
            y[i] += vk * h;
            let dx = scenario.participants[i].drift.eval(x[i], &[ui]) * h;
            x[i] = catchup_step(x[i], dx, y[i], r, h).next;
        }
    }
    Ok((v, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::twodisk_scenario;

    #[test]
    fn reference_values() {
        let s = twodisk_scenario::<f64>();
        let grid = TimeGrid::new(6.0, 2400).unwrap();
        let (p, sol) = solve_twodisk_parametric(&s, grid).unwrap();
        assert!((p.t_b - 5.914823608937763).abs() < 1e-8, "{}", p.t_b);
        assert!((p.v_bar - 11.859990561298313).abs() < 1e-8);
        assert!((p.t_a - 0.252951297431015).abs() < 1e-9);
        assert!((p.j_h() - 9.0).abs() < 1e-9);
        assert!((sol.j_h - 9.0).abs() < 0.05, "{}", sol.j_h);
        assert!(sol.audit.is_feasible(1e-6), "{:?}", sol.audit);
    }

    #[test]
    fn continuity_at_switches() {
        let s = twodisk_scenario::<f64>();
        let (p, _) = solve_twodisk_parametric(&s, TimeGrid::new(6.0, 60).unwrap()).unwrap();
        let e = 1e-9;
        assert!((p.gamma_lead(p.t_b - e) - p.gamma_lead(p.t_b + e)).abs() < 1e-6);
        assert!((p.lower_controls(p.t_b - e)[1] - 1.0).abs() < 1e-6);
        assert!((p.lead_center(p.t_a) - (p.gamma_lead(p.t_a) - 3.0)).abs() < 1e-9);
        assert!((p.gamma_lead(6.0)).abs() < 1e-9);
        for j in 0..=600 {
            assert!(p.lower_controls(j as f64 * 0.01)[0] < 1.0);
        }
    }

    #[test]
    fn rejects_other_families() {
        let mut s = twodisk_scenario::<f64>();
        s.participants[0].drift = DriftSpec::ScaledLinear { c: 8.0 };
        s.participants[1].drift = DriftSpec::ScaledLinear { c: 8.0 };
        assert!(matches!(
            solve_twodisk_parametric(&s, TimeGrid::new(6.0, 60).unwrap()),
            Err(BilevelError::UnsupportedFamily(_))
        ));
    }
}
