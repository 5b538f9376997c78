//! Aggregated verdicts of the optimality system.

use crate::bilevel::BilevelSolution;
use crate::dynamics::Scenario;
use crate::nco::residuals::{
    adjoint_residual, boundary_residual, lower_relation, max_condition_lower, max_condition_upper,
    monotonicity_residual, SubgradientSource,
};
use crate::nco::{total_variation, LowerMultipliers, LowerWitness, NcoError, UpperMultipliers};
use crate::real::Real;

/// Slack on `‖y^i − y^j‖ − 2R` and `R − ‖x^i − y^i‖` for the activity sets
/// of the constancy checks.
pub const REP_TOL: f64 = 1e-6;

/// Smallest multiplier size accepted as nontrivial.
pub const NONTRIVIALITY_FLOOR: f64 = 1e-8;

/// One residual against its tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check<T> {
    pub residual: T,
    pub tol: T,
    pub pass: bool,
}

impl<T: Real> Check<T> {
    pub fn new(residual: T, tol: T) -> Self {
        Self { residual, tol, pass: residual <= tol }
    }

    /// Residual over tolerance (infinite when the tolerance is zero and the residual is not).
    pub fn ratio(&self) -> T {
        if self.residual <= T::zero() {
            T::zero()
        } else {
            self.residual / self.tol
        }
    }
}

/// Size of a multiplier tuple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nontriviality<T> {
    /// Sup norm of the `q_H` (upper) or `p_H` (lower) path.
    pub q_h: T,
    pub q_l: T,
    /// Total variation of the step multipliers.
    pub tv: T,
    pub lambda: T,
    pub alpha: T,
    pub measure: T,
    pub pass: bool,
}

impl<T: Real> Nontriviality<T> {
    fn new(q_h: T, q_l: T, tv: T, lambda: T, alpha: T) -> Self {
        let measure = q_h.max(q_l) + tv + lambda + alpha;
        Self { q_h, q_l, tv, lambda, alpha, measure, pass: measure >= T::lit(NONTRIVIALITY_FLOOR) }
    }

    /// True when the costates alone (not `λ`, `α` or the step multipliers) clear the floor.
    pub fn carried_by_q_l(&self) -> bool {
        self.q_l >= T::lit(NONTRIVIALITY_FLOOR)
    }
}

pub(crate) fn upper_size<T: Real>(m: &UpperMultipliers<T>) -> Nontriviality<T> {
    let sup = |v: &[crate::linalg::Vec2<T>]| v.iter().fold(T::zero(), |a, q| a.max(q.norm()));
    let mut tv: T = m.nu_l.iter().map(|p| total_variation(p)).sum();
    for (i, j) in m.nu_h.pairs() {
        tv = tv + m.nu_h.path(i, j).map_or(T::zero(), total_variation);
    }
    let alpha = m.alpha.iter().map(|a| a.abs()).sum();
    Nontriviality::new(sup(&m.q_h), sup(&m.q_l), tv, m.lambda, alpha)
}

pub(crate) fn lower_size<T: Real>(w: &LowerWitness<T>, i: usize) -> Nontriviality<T> {
    let sup = |v: &[crate::linalg::Vec2<T>]| v.iter().fold(T::zero(), |a, q| a.max(q.norm()));
    let mut tv = total_variation(&w.mu_l);
    for (j, p) in w.mu_h.iter().enumerate() {
        if j != i {
            tv = tv + total_variation(p);
        }
    }
    Nontriviality::new(sup(&w.p_h), sup(&w.p_l), tv, w.lambda_bar, T::zero())
}

/// Verdicts of one participant's lower-level relation.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerReport<T> {
    pub participant: usize,
    pub nontriviality: Nontriviality<T>,
    pub monotonicity: Check<T>,
    pub inclusion: Check<T>,
    pub subgradient: Check<T>,
    pub boundary: Check<T>,
    pub degenerate_steps: usize,
    pub pass: bool,
}

impl<T: Real> LowerReport<T> {
    pub fn checks(&self) -> [(&'static str, Check<T>); 4] {
        [
            ("monotonicity", self.monotonicity),
            ("inclusion", self.inclusion),
            ("subgradient", self.subgradient),
            ("boundary", self.boundary),
        ]
    }
}

/// Residuals and verdicts for a candidate solution and multipliers.
#[derive(Clone, Debug, PartialEq)]
pub struct NcoReport<T> {
    /// Base tolerance before scaling with the costate size.
    pub tol: T,
    pub nontriviality: Nontriviality<T>,
    pub adjoint_q_l: Check<T>,
    pub adjoint_q_h: Check<T>,
    pub boundary: Check<T>,
    pub max_lower: Check<T>,
    /// Per-cell gap of the lower-level maximum condition.
    pub max_lower_gap: Vec<T>,
    pub max_upper: Check<T>,
    pub monotonicity: Check<T>,
    pub lower: Vec<LowerReport<T>>,
    /// Cells where a contact direction was undefined and the zero selection was used.
    pub degenerate_steps: usize,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl<T: Real> NcoReport<T> {
    /// Named upper-level checks in report order.
    pub fn checks(&self) -> [(&'static str, Check<T>); 6] {
        [
            ("adjoint_qL", self.adjoint_q_l),
            ("adjoint_qH", self.adjoint_q_h),
            ("boundary", self.boundary),
            ("max_lower", self.max_lower),
            ("max_upper", self.max_upper),
            ("monotonicity", self.monotonicity),
        ]
    }

    /// Largest residual-to-tolerance ratio over every check; infinite when a
    /// nontriviality verdict fails.
    pub fn worst_ratio(&self) -> T {
        if !self.nontriviality.pass || self.lower.iter().any(|l| !l.nontriviality.pass) {
            return T::infinity();
        }
        let upper = self.checks().iter().fold(T::zero(), |a, (_, c)| a.max(c.ratio()));
        self.lower.iter().flat_map(|l| l.checks()).fold(upper, |a, (_, c)| a.max(c.ratio()))
    }
}

pub(crate) const PSI_NOTE: &str =
    "value-function subgradients use the stored inner minimizer only; other lower-level optima are not sampled";

/// Verdicts of one participant's lower-level relation at base tolerance `tol`.
pub(crate) fn lower_report<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    i: usize,
    w: &LowerWitness<T>,
    tol: T,
) -> Result<LowerReport<T>, NcoError> {
    let size = lower_size(w, i);
    let scaled = tol * (T::one() + size.q_h.max(size.q_l));
    let r = lower_relation(scenario, sol, i, w)?;
    let checks = [
        Check::new(r.monotonicity, scaled),
        Check::new(r.inclusion, scaled),
        Check::new(r.subgradient, scaled),
        Check::new(r.boundary, scaled),
    ];
    let pass = size.pass && checks.iter().all(|c| c.pass);
    Ok(LowerReport {
        participant: i,
        nontriviality: size,
        monotonicity: checks[0],
        inclusion: checks[1],
        subgradient: checks[2],
        boundary: checks[3],
        degenerate_steps: r.degenerate_steps,
        pass,
    })
}

/// Upper-level part of the report (lower reports left empty).
pub(crate) fn upper_report<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    upper: &UpperMultipliers<T>,
    source: SubgradientSource<'_, T>,
    tol: T,
) -> Result<NcoReport<T>, NcoError> {
    let size = upper_size(upper);
    let scaled = tol * (T::one() + size.q_h.max(size.q_l));
    let adj = adjoint_residual(scenario, sol, upper)?;
    let boundary = boundary_residual(scenario, sol, upper)?;
    let gaps = max_condition_lower(scenario, sol, upper)?;
    let gap = gaps.iter().fold(T::zero(), |a, &g| a.max(g));
    let mut notes = vec![PSI_NOTE.to_string()];
    let upper_res = match max_condition_upper(scenario, sol, upper, source) {
        Ok(r) => r,
        Err(NcoError::IndeterminateWitness { participant }) => {
            notes.push(format!("participant {participant}: no subgradient of the value function available"));
            T::infinity()
        }
        Err(e) => return Err(e),
    };
    let mono = monotonicity_residual(scenario, sol, upper)?;
    if adj.degenerate_steps > 0 {
        notes.push(format!("{} cells with coincident x and y used the zero selection", adj.degenerate_steps));
    }
    Ok(NcoReport {
        tol,
        nontriviality: size,
        adjoint_q_l: Check::new(adj.q_l, scaled),
        adjoint_q_h: Check::new(adj.q_h, scaled),
        boundary: Check::new(boundary, scaled),
        max_lower: Check::new(gap, scaled),
        max_lower_gap: gaps,
        max_upper: Check::new(upper_res, scaled),
        monotonicity: Check::new(mono, scaled),
        lower: Vec::new(),
        degenerate_steps: adj.degenerate_steps,
        notes,
        pass: false,
    })
}

/// Checks every condition of the optimality system for `sol` with the given
/// multipliers. `tol` is the base tolerance; each check uses
/// `tol·(1 + ‖costates‖_∞)` of its own multiplier tuple.
pub fn verify<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    upper: &UpperMultipliers<T>,
    lower: &LowerMultipliers<T>,
    tol: T,
) -> Result<NcoReport<T>, NcoError> {
    if lower.witnesses.len() != scenario.n() {
        return Err(NcoError::Dimension(format!("expected {} lower witnesses", scenario.n())));
    }
    let mut report = upper_report(scenario, sol, upper, SubgradientSource::Witness(lower), tol)?;
    for (i, w) in lower.witnesses.iter().enumerate() {
        let lr = lower_report(scenario, sol, i, w, tol)?;
        report.degenerate_steps += lr.degenerate_steps;
        report.lower.push(lr);
    }
    report.pass = report.nontriviality.pass
        && report.checks().iter().all(|(_, c)| c.pass)
        && report.lower.iter().all(|l| l.pass);
    Ok(report)
}
