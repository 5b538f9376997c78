//! Witness search for the multipliers.
//!
//! Step multipliers are parameterized by a few nonnegative levels with jumps
//! at the detected contact onset and at the terminal time; costates are then
//! integrated backward from their terminal conditions along a selection of
//! the adjoint right-hand side, so the adjoint inclusions hold by
//! construction and the search only has to settle the remaining conditions.

use rayon::prelude::*;

use crate::bilevel::search::{compass_search, coordinate_directions, halton_point, CompassOptions};
use crate::bilevel::{value_function, BilevelSolution, InnerOptions};
use crate::dynamics::{check_feasibility, ControlSetSpec, Scenario, REPORT_TOL};
use crate::linalg::Vec2;
use crate::nco::hamiltonian::{control_sup, pair_weighted};
use crate::nco::residuals::{min_affine_over_face, upper_rhs, Frame, LowerCell, SubgradientSource};
use crate::nco::verify::{lower_report, lower_size, upper_report, upper_size, verify, NcoReport};
use crate::nco::{LowerMultipliers, LowerWitness, NcoError, UpperMultipliers};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions<T> {
    /// Base verification tolerance.
    pub tol: T,
    /// Offsets the low-discrepancy starts.
    pub seed: u64,
    /// Starts evaluated per branch before the local search.
    pub starts: usize,
    /// Evaluation budget of the local search per branch.
    pub max_evals: usize,
    /// Number of time blocks for central-difference value-function
    /// subgradients; `None` skips them.
    pub fd_blocks: Option<usize>,
    /// Perturbation size of the central differences.
    pub fd_step: T,
    pub inner: InnerOptions<T>,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-3),
            seed: 0,
            starts: 8,
            max_evals: 600,
            fd_blocks: None,
            fd_step: T::lit(1e-2),
            inner: InnerOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult<T> {
    pub upper: UpperMultipliers<T>,
    pub lower: LowerMultipliers<T>,
    pub report: NcoReport<T>,
    /// Worst residual-to-tolerance ratio of the returned witness.
    pub achieved: T,
    pub verified: bool,
}

/// First node where the population touches its disk boundary (`K` if never).
fn onset<T: Real>(fr: &Frame<'_, T>, i: usize) -> usize {
    (0..=fr.cells).find(|&k| fr.rep_active(k, i)).unwrap_or(fr.cells)
}

/// Non-increasing three-level path from `(p1, p2, p3) ≥ 0`: the levels are
/// `p1+p2+p3` before `start`, `p2+p3` up to the last cell and `p3` at `T`.
fn three_level<T: Real>(p: &[T], start: usize, cells: usize) -> Vec<T> {
    let c = p[2];
    let b = c + p[1];
    let a = b + p[0];
    (0..=cells).map(|k| if k == cells { c } else if k < start { a } else { b }).collect()
}

/// Two-level path: `p1+p2` on every cell, `p2` at `T`.
fn two_level<T: Real>(p: &[T], cells: usize) -> Vec<T> {
    (0..=cells).map(|k| if k == cells { p[1] } else { p[0] + p[1] }).collect()
}

fn ratio_of<T: Real>(pass_size: bool, checks: impl Iterator<Item = T>) -> T {
    if !pass_size {
        return T::infinity();
    }
    checks.fold(T::zero(), |a, r| a.max(r))
}

struct LowerBuilder<'a, T> {
    fr: &'a Frame<'a, T>,
    i: usize,
    onset: usize,
    lambda_bar: T,
}

impl<'a, T: Real> LowerBuilder<'a, T> {
    fn dim(&self) -> usize {
        3 + 2 * (self.fr.n - 1)
    }

    fn build(&self, params: &[T]) -> Result<LowerWitness<T>, NcoError> {
        let fr = self.fr;
        let (i, cells, h) = (self.i, fr.cells, fr.h);
        let p = &fr.scenario.participants[i];
        let mut w = LowerWitness::zeros(cells + 1, fr.n);
        w.lambda_bar = self.lambda_bar;
        w.mu_l = three_level(&params[..3], self.onset, cells);
        let mut slot = 3;
        for j in 0..fr.n {
            if j != i {
                w.mu_h[j] = two_level(&params[slot..slot + 2], cells);
                slot += 2;
            }
        }
        let yt = fr.centers(cells);
        let zt = fr.z(cells, i);
        w.p_l[cells] = zt * w.mu_l[cells];
        w.p_h[cells] = -pair_weighted(&yt, i, zt * w.mu_l[cells], |j| w.mu_h[j][cells])?;
        let mut zeta = Vec::with_capacity(cells);
        for k in (0..cells).rev() {
            let cell = LowerCell::new(fr, &w, w.p_l[k + 1], i, k)?;
            let face = control_sup(&p.drift, &p.u_set, fr.sol.x.at(k, i), cell.w, self.lambda_bar).face;
            let r = |u: &[T], th: T| {
                let rx = cell.parts(u, th).0;
                vec![rx.x, rx.y]
            };
            let (u_sel, th, _) = min_affine_over_face(
                r,
                &face,
                (cell.sub.theta_lo, cell.sub.theta_hi),
                (fr.sol.u.get(i, k), fr.xi_fraction(k, i)),
            );
            let (_, rl, rh) = cell.parts(&u_sel, th);
            w.p_l[k] = w.p_l[k + 1] + rl * h;
            w.p_h[k] = w.p_h[k + 1] + rh * h;
            if self.lambda_bar > T::zero() {
                let lead = pair_weighted(&fr.centers(k + 1), i, w.p_h[k + 1] + fr.z(k + 1, i) * w.mu_l[k], |j| {
                    w.mu_h[j][k]
                })?;
                zeta.push(lead * (-T::one() / self.lambda_bar));
            }
        }
        if self.lambda_bar > T::zero() {
            zeta.reverse();
            w.zeta = Some(zeta);
        } else {
            let m = lower_size(&w, i).measure;
            if m > T::zero() {
                w.scale(T::one() / m);
            }
        }
        Ok(w)
    }

    fn objective(&self, params: &[T], tol: T) -> T {
        let Ok(w) = self.build(params) else { return T::infinity() };
        match lower_report(self.fr.scenario, self.fr.sol, self.i, &w, tol) {
            Ok(r) => ratio_of(r.nontriviality.pass, r.checks().iter().map(|(_, c)| c.ratio())),
            Err(_) => T::infinity(),
        }
    }
}

/// Evaluates the structured starts, then Halton points, stopping at the first
/// one that verifies; otherwise polishes the best by compass search.
fn search_branch<T: Real>(
    dim: usize,
    structured: &[Vec<T>],
    opts: &FitOptions<T>,
    mut f: impl FnMut(&[T]) -> T,
) -> (Vec<T>, T) {
    let mut best: Option<(Vec<T>, T)> = None;
    let halton = (0..opts.starts as u64)
        .map(|s| halton_point(opts.seed.wrapping_mul(1009).wrapping_add(s + 1), dim).into_iter().map(T::lit).collect());
    for start in structured.iter().cloned().chain(halton).take(structured.len() + opts.starts) {
        let v = f(&start);
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((start, v));
        }
        if v <= T::one() {
            break;
        }
    }
    let (x, v) = best.expect("at least one start");
    if v <= T::one() || opts.max_evals == 0 {
        return (x, v);
    }
    let lo = vec![T::zero(); dim];
    let hi = vec![T::one(); dim];
    let copts = CompassOptions { initial_fraction: T::lit(0.25), min_fraction: T::lit(1e-6), max_evals: opts.max_evals };
    let res = compass_search(&mut f, &x, &lo, &hi, &coordinate_directions(dim), &copts);
    if res.value < v {
        (res.x, res.value)
    } else {
        (x, v)
    }
}

fn fit_lower<T: Real>(fr: &Frame<'_, T>, i: usize, opts: &FitOptions<T>) -> Result<LowerWitness<T>, NcoError> {
    let mut best: Option<(LowerWitness<T>, T)> = None;
    for lambda_bar in [T::one(), T::zero()] {
        let b = LowerBuilder { fr, i, onset: onset(fr, i), lambda_bar };
        let dim = b.dim();
        let mut constant = vec![T::zero(); dim];
        constant[2] = T::one();
        let structured = if lambda_bar > T::zero() { vec![vec![T::zero(); dim], constant] } else { vec![constant] };
        let (x, v) = search_branch(dim, &structured, opts, |p| b.objective(p, opts.tol));
        let w = b.build(&x)?;
        if v <= T::one() {
            return Ok(w);
        }
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((w, v));
        }
    }
    Ok(best.expect("two branches").0)
}

struct UpperBuilder<'a, T> {
    fr: &'a Frame<'a, T>,
    onsets: Vec<usize>,
    lambda: T,
}

impl<'a, T: Real> UpperBuilder<'a, T> {
    fn dim(&self) -> usize {
        let n = self.fr.n;
        3 * n + n * (n - 1)
    }

    fn build(&self, params: &[T]) -> Result<UpperMultipliers<T>, NcoError> {
        let fr = self.fr;
        let (n, cells, h) = (fr.n, fr.cells, fr.h);
        let mut m = UpperMultipliers::zeros(fr.sol.y.grid, n);
        m.lambda = self.lambda;
        for (i, p) in fr.scenario.participants.iter().enumerate() {
            m.alpha[i] = self.lambda * p.rho;
            m.nu_l[i] = three_level(&params[3 * i..3 * i + 3], self.onsets[i], cells);
        }
        let mut slot = 3 * n;
        for i in 0..n {
            for j in i + 1..n {
                m.nu_h.set_path(i, j, two_level(&params[slot..slot + 2], cells))?;
                slot += 2;
            }
        }
        let yt = fr.centers(cells);
        for i in 0..n {
            let z = fr.z(cells, i);
            let nu = m.nu_l[i][cells];
            m.q_l[cells * n + i] = z * nu;
            m.q_h[cells * n + i] = -pair_weighted(&yt, i, yt[i] * self.lambda + z * nu, |j| m.nu_h.get(i, j, cells))?;
        }
        for k in (0..cells).rev() {
            for i in 0..n {
                let rhs = upper_rhs(fr, &m, m.q_l(k + 1, i), k, i)?;
                let th = fr.xi_fraction(k, i).clamp_to(rhs.sub.theta_lo, rhs.sub.theta_hi);
                let g = rhs.sub.grad * th;
                m.q_l[k * n + i] = m.q_l(k + 1, i) + (rhs.a_l + g) * h;
                m.q_h[k * n + i] = m.q_h(k + 1, i) + (rhs.a_h - g) * h;
            }
        }
        if self.lambda == T::zero() {
            let s = upper_size(&m).measure;
            if s > T::zero() {
                m.scale(T::one() / s);
            }
        }
        Ok(m)
    }

    fn objective(&self, params: &[T], lower: &LowerMultipliers<T>, tol: T) -> T {
        let Ok(m) = self.build(params) else { return T::infinity() };
        match upper_report(self.fr.scenario, self.fr.sol, &m, SubgradientSource::Witness(lower), tol) {
            Ok(r) => ratio_of(r.nontriviality.pass, r.checks().iter().map(|(_, c)| c.ratio())),
            Err(_) => T::infinity(),
        }
    }
}

fn fit_upper<T: Real>(
    fr: &Frame<'_, T>,
    lower: &LowerMultipliers<T>,
    opts: &FitOptions<T>,
) -> Result<UpperMultipliers<T>, NcoError> {
    let n = fr.n;
    let onsets: Vec<usize> = (0..n).map(|i| onset(fr, i)).collect();
    let mut best: Option<(UpperMultipliers<T>, T)> = None;
    for lambda in [T::one(), T::zero()] {
        let b = UpperBuilder { fr, onsets: onsets.clone(), lambda };
        let dim = b.dim();
        let mut constant = vec![T::zero(); dim];
        for i in 0..n {
            constant[3 * i + 2] = T::one();
        }
        let mut with_pairs = constant.clone();
        for s in 0..n * (n - 1) / 2 {
            with_pairs[3 * n + 2 * s + 1] = T::one();
        }
        let structured = if lambda > T::zero() {
            vec![vec![T::zero(); dim], constant, with_pairs]
        } else {
            vec![constant, with_pairs]
        };
        let (x, v) = search_branch(dim, &structured, opts, |p| b.objective(p, lower, opts.tol));
        let m = b.build(&x)?;
        if v <= T::one() {
            return Ok(m);
        }
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((m, v));
        }
    }
    Ok(best.expect("two branches").0)
}

/// Central-difference estimate of participant `i`'s value-function
/// subgradient at its candidate upper control, one value per cell.
///
/// Cells are grouped into `blocks` contiguous blocks and the control is
/// perturbed blockwise along feasible directions of `V^i` (only the segment
/// direction for a segment). One-sided differences are used where one side
/// leaves the set.
pub fn fd_subgradient<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    i: usize,
    blocks: usize,
    step: T,
    inner: &InnerOptions<T>,
) -> Result<Vec<Vec2<T>>, NcoError> {
    let p = scenario.participants.get(i).ok_or(NcoError::Participant(i))?;
    let grid = sol.v.grid;
    let cells = grid.cells;
    let blocks = blocks.clamp(1, cells);
    let dirs: Vec<Vec2<T>> = match &p.v_set {
        ControlSetSpec::Segment { direction, .. } => vec![*direction],
        _ => vec![Vec2::new(T::one(), T::zero()), Vec2::new(T::zero(), T::one())],
    };
    let base = sol.v.participant(i);
    let phi0 = value_function(scenario, i, &base, inner)?.phi;
    let slack = T::lit(REPORT_TOL);
    let ranges: Vec<(usize, usize)> = (0..blocks).map(|b| (b * cells / blocks, (b + 1) * cells / blocks)).collect();
    let comps: Vec<Result<Vec2<T>, NcoError>> = ranges
        .par_iter()
        .map(|&(a, b)| {
            let mut zeta = Vec2::zero();
            let len = T::from_count(b - a) * grid.h();
            for &d in &dirs {
                let eval = |s: T| -> Result<Option<T>, NcoError> {
                    let mut prof = base.clone();
                    for k in a..b {
                        let v = base.vec2(0, k) + d * s;
                        if p.v_set.distance(&[v.x, v.y]) > slack {
                            return Ok(None);
                        }
                        prof.set(0, k, &[v.x, v.y]);
                    }
                    Ok(Some(value_function(scenario, i, &prof, inner)?.phi))
                };
                let plus = eval(step)?;
                let minus = eval(-step)?;
                let slope = match (plus, minus) {
                    (Some(a), Some(b)) => (a - b) / (step * T::lit(2.0)),
                    (Some(a), None) => (a - phi0) / step,
                    (None, Some(b)) => (phi0 - b) / step,
                    (None, None) => T::zero(),
                };
                zeta += d * (slope / len);
            }
            Ok(zeta)
        })
        .collect();
    let mut out = vec![Vec2::zero(); cells];
    for (&(a, b), c) in ranges.iter().zip(comps) {
        let c = c?;
        out[a..b].iter_mut().for_each(|z| *z = c);
    }
    Ok(out)
}

/// Searches for upper multipliers and per-participant lower witnesses that
/// satisfy the optimality system for `sol`, and reports the best found.
///
/// A witness above tolerance means the search failed, not that the
/// candidate is not optimal.
pub fn fit_multipliers<T: Real>(
    scenario: &Scenario<T>,
    sol: &BilevelSolution<T>,
    opts: &FitOptions<T>,
) -> Result<FitResult<T>, NcoError> {
    let audit = check_feasibility(scenario, &sol.y, &sol.x, &sol.u, &sol.v)?;
    let worst = audit.max_violation();
    if worst > T::lit(REPORT_TOL) {
        return Err(NcoError::Precondition { violation: worst.to_f64_lossy() });
    }
    let fr = Frame::new(scenario, sol)?;
    let witnesses = (0..fr.n)
        .into_par_iter()
        .map(|i| fit_lower(&fr, i, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut lower = LowerMultipliers { grid: sol.y.grid, witnesses, fd_subgradient: None };
    if let Some(blocks) = opts.fd_blocks {
        if lower.witnesses.iter().any(|w| w.zeta.is_none()) {
            let fd = (0..fr.n)
                .map(|i| fd_subgradient(scenario, sol, i, blocks, opts.fd_step, &opts.inner))
                .collect::<Result<Vec<_>, _>>()?;
            lower.fd_subgradient = Some(fd);
        }
    }
    let upper = fit_upper(&fr, &lower, opts)?;
    let report = verify(scenario, sol, &upper, &lower, opts.tol)?;
    let achieved = report.worst_ratio();
    let verified = report.pass;
    Ok(FitResult { upper, lower, report, achieved, verified })
}
