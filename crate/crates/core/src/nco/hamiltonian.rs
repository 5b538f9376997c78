//! Pointwise Hamiltonians and the exact control maximization they need.

use crate::dynamics::{ControlSetSpec, DriftSpec, Scenario};
use crate::geometry::{pair_direction, sigma_support, KINK_REL_TOL};
use crate::linalg::Vec2;
use crate::nco::NcoError;
use crate::real::Real;

/// Maximum of `u ↦ ⟨w, f(x,u)⟩ − λ̄‖u‖²` over the control set.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSup<T> {
    pub value: T,
    /// Set of maximizers (a single point when `λ̄ > 0`).
    pub face: ControlSetSpec<T>,
}

fn point<T: Real>(p: Vec<T>) -> ControlSetSpec<T> {
    ControlSetSpec::Interval { lo: p.clone(), hi: p }
}

/// Exact maximization over the supported control sets: a projection when
/// the quadratic term is present, the support function otherwise.
pub fn control_sup<T: Real>(drift: &DriftSpec<T>, set: &ControlSetSpec<T>, x: Vec2<T>, w: Vec2<T>, lambda_bar: T) -> ControlSup<T> {
    let base = w.dot(drift.base(x));
    let g = drift.control_gradient(x, w);
    if lambda_bar > T::zero() {
        let target: Vec<T> = g.iter().map(|&gj| gj / (lambda_bar * T::lit(2.0))).collect();
        let u = set.project(&target);
        let value = base + g.iter().zip(&u).map(|(&a, &b)| a * b).sum::<T>()
            - lambda_bar * u.iter().map(|&b| b * b).sum::<T>();
        return ControlSup { value, face: point(u) };
    }
    let value = base + set.support(&g);
    let col_scale = (0..g.len()).map(|j| drift.column(x, j).norm()).fold(T::zero(), |a, b| a.max(b));
    let tol = T::lit(KINK_REL_TOL) * (T::one() + w.norm() * col_scale);
    let face = match set {
        ControlSetSpec::Interval { lo, hi } => {
            let mut flo = lo.clone();
            let mut fhi = hi.clone();
            for j in 0..g.len() {
                if g[j] > tol {
                    flo[j] = hi[j];
                } else if g[j] < -tol {
                    fhi[j] = lo[j];
                }
            }
            ControlSetSpec::Interval { lo: flo, hi: fhi }
        }
        ControlSetSpec::Segment { direction, .. } => {
            if (g[0] * direction.x + g[1] * direction.y).abs() <= tol {
                set.clone()
            } else {
                point(set.support_point(&g))
            }
        }
        ControlSetSpec::Ball { .. } => {
            if g.iter().map(|&a| a * a).sum::<T>().sqrt() <= tol {
                set.clone()
            } else {
                point(set.support_point(&g))
            }
        }
    };
    ControlSup { value, face }
}

/// Upper-level data of all participants at one time point.
#[derive(Clone, Copy)]
pub struct UpperPoint<'a, T> {
    pub y: &'a [Vec2<T>],
    pub x: &'a [Vec2<T>],
    pub v: &'a [Vec2<T>],
    pub u: &'a [&'a [T]],
    pub q_h: &'a [Vec2<T>],
    pub q_l: &'a [Vec2<T>],
    /// `nu_h(i, j)`, symmetric with zero diagonal.
    pub nu_h: &'a dyn Fn(usize, usize) -> T,
    pub nu_l: &'a [T],
    pub alpha: &'a [T],
}

/// `q_H^i + Σ_j ν_H^{ij} (y^i − y^j)/‖y^i − y^j‖`, skipping pairs with zero weight.
pub(crate) fn pair_weighted<T: Real>(
    y: &[Vec2<T>],
    i: usize,
    base: Vec2<T>,
    weight: impl Fn(usize) -> T,
) -> Result<Vec2<T>, NcoError> {
    let mut acc = base;
    for j in 0..y.len() {
        if j == i {
            continue;
        }
        let w = weight(j);
        if w != T::zero() {
            acc += pair_direction(y[i], y[j])? * w;
        }
    }
    Ok(acc)
}

/// Upper Hamiltonian summed over participants.
pub fn hamiltonian_upper<T: Real>(scenario: &Scenario<T>, pt: &UpperPoint<'_, T>) -> Result<T, NcoError> {
    let n = scenario.n();
    if [pt.y.len(), pt.x.len(), pt.v.len(), pt.u.len(), pt.q_h.len(), pt.q_l.len(), pt.nu_l.len(), pt.alpha.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(NcoError::Dimension(format!("expected {n} participants at the evaluation point")));
    }
    let mut total = T::zero();
    for (i, p) in scenario.participants.iter().enumerate() {
        let z = pt.x[i] - pt.y[i];
        let w = pt.q_l[i] - z * pt.nu_l[i];
        let f = p.drift.eval(pt.x[i], pt.u[i]);
        let sigma = sigma_support(z, pt.q_l[i], pt.nu_l[i], scenario.radius, p.cap)?;
        let effort = pt.u[i].iter().map(|&a| a * a).sum::<T>();
        let lead = pair_weighted(pt.y, i, pt.q_h[i], |j| (pt.nu_h)(i, j))?;
        total = total + w.dot(f) + z.dot(pt.v[i]) * pt.nu_l[i] + sigma - pt.alpha[i] * effort + lead.dot(pt.v[i]);
    }
    Ok(total)
}

/// Lower Hamiltonian of participant `i` with the control maximized out.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian_lower<T: Real>(
    scenario: &Scenario<T>,
    i: usize,
    y: &[Vec2<T>],
    x: Vec2<T>,
    v: Vec2<T>,
    p_h: Vec2<T>,
    p_l: Vec2<T>,
    mu_h: &[T],
    mu_l: T,
    lambda_bar: T,
) -> Result<T, NcoError> {
    let p = scenario.participants.get(i).ok_or(NcoError::Participant(i))?;
    if y.len() != scenario.n() || mu_h.len() != scenario.n() {
        return Err(NcoError::Dimension("pair data must cover every participant".into()));
    }
    let z = x - y[i];
    let w = p_l - z * mu_l;
    let cone = sigma_support(z, p_l, mu_l, scenario.radius, p.cap)?;
    let sup = control_sup(&p.drift, &p.u_set, x, w, lambda_bar).value;
    let lead = pair_weighted(y, i, p_h, |j| mu_h[j])?;
    Ok(z.dot(v) * mu_l + cone + sup + lead.dot(v))
}
