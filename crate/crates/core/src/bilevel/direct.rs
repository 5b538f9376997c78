//! Penalized direct search over piecewise-constant upper controls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bilevel::inner::{lower_feasible, value_function_on_path, InnerOptions};
use crate::bilevel::search::{compass_search, push_group_direction, coordinate_directions, CompassOptions};
use crate::bilevel::{BilevelError, BilevelSolution, Method};
use crate::dynamics::{
    cost_lower, cost_upper, integrate_lower_catchup, integrate_upper, ControlProfile, ControlSetSpec, Scenario,
    TimeGrid, Trajectory,
};
use crate::linalg::Vec2;
use crate::real::Real;

/// Settings of [`solve_bilevel_direct`].
#[derive(Clone, Debug, PartialEq)]
pub struct DirectOptions<T> {
    /// Number of constant pieces of each upper control.
    pub coarse_cells: usize,
    /// Simulation grid cells.
    pub fine_cells: usize,
    pub starts: usize,
    pub seed: u64,
    /// Partial-calmness moduli; the scenario's values when `None`.
    pub rho: Option<Vec<T>>,
    /// Bias policies tried when screening the lower level for feasibility.
    pub screening_probes: usize,
    pub search: CompassOptions<T>,
    pub inner: InnerOptions<T>,
}

impl<T: Real> Default for DirectOptions<T> {
    fn default() -> Self {
        Self {
            coarse_cells: 8,
            fine_cells: 2400,
            starts: 8,
            seed: 0,
            rho: None,
            screening_probes: 4,
            search: CompassOptions { initial_fraction: T::lit(0.25), min_fraction: T::lit(1e-5), max_evals: 4000 },
            inner: InnerOptions::default(),
        }
    }
}

/// `J_H(y(T)) + Σ ρ^i (J_L^i(u^i) − φ^i(v^i))`, with the value function
/// estimate capped at the candidate's own cost so the penalty stays `≥ 0`.
pub fn penalized_objective<T: Real>(
    scenario: &Scenario<T>,
    v: &ControlProfile<T>,
    u: &ControlProfile<T>,
    x0: &[Vec2<T>],
    rho: &[T],
    inner: &InnerOptions<T>,
) -> Result<T, BilevelError> {
    if rho.len() != scenario.n() {
        return Err(BilevelError::Dimension(format!("{} moduli for {} participants", rho.len(), scenario.n())));
    }
    let y = integrate_upper(scenario, v)?;
    integrate_lower_catchup(scenario, &y, u, x0)?;
    let mut total = cost_upper(&y.terminal());
    for (i, &r) in rho.iter().enumerate() {
        if r == T::zero() {
            continue;
        }
        let jl = cost_lower(u, i);
        let phi = value_function_on_path(scenario, i, &y.path(i), y.grid, inner)?.phi;
        total = total + r * (jl - phi.min(jl));
    }
    Ok(total)
}

/// Maps search parameters to upper controls.
struct UpperParam<T> {
    offsets: Vec<usize>,
    widths: Vec<usize>,
    coarse: usize,
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> UpperParam<T> {
    fn new(scenario: &Scenario<T>, coarse: usize) -> Self {
        let mut offsets = Vec::new();
        let mut widths = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for p in &scenario.participants {
            offsets.push(lo.len());
            let (l, h) = match &p.v_set {
                ControlSetSpec::Segment { halflength, .. } => (vec![-*halflength], vec![*halflength]),
                other => other.bounding_box(),
            };
            widths.push(l.len());
            for _ in 0..coarse {
                lo.extend_from_slice(&l);
                hi.extend_from_slice(&h);
            }
        }
        Self { offsets, widths, coarse, lo, hi }
    }

    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn index(&self, i: usize, c: usize, j: usize) -> usize {
        self.offsets[i] + c * self.widths[i] + j
    }

    fn control(&self, scenario: &Scenario<T>, params: &[T], i: usize, c: usize) -> Vec2<T> {
        let w = self.widths[i];
        let raw = &params[self.index(i, c, 0)..self.index(i, c, 0) + w];
        match &scenario.participants[i].v_set {
            ControlSetSpec::Segment { direction, .. } => *direction * raw[0],
            set => {
                let p = set.project(raw);
                Vec2::new(p[0], p[1])
            }
        }
    }

    fn profile(&self, scenario: &Scenario<T>, params: &[T], grid: TimeGrid<T>) -> ControlProfile<T> {
        let n = scenario.n();
        ControlProfile::from_fn(grid, &vec![2; n], |i, k| {
            let c = (k * self.coarse) / grid.cells;
            let v = self.control(scenario, params, i, c);
            vec![v.x, v.y]
        })
    }

    /// Compass directions: coordinates, each cell across participants, each
    /// participant across cells, and everything at once.
    fn directions(&self, n: usize) -> Vec<Vec<T>> {
        let dim = self.dim();
        let mut dirs = coordinate_directions(dim);
        if n > 1 {
            for c in 0..self.coarse {
                for j in 0..self.widths.iter().copied().min().unwrap_or(0) {
                    let group: Vec<usize> = (0..n).map(|i| self.index(i, c, j)).collect();
                    push_group_direction(&mut dirs, dim, &group);
                }
            }
        }
        for i in 0..n {
            for j in 0..self.widths[i] {
                let group: Vec<usize> = (0..self.coarse).map(|c| self.index(i, c, j)).collect();
                push_group_direction(&mut dirs, dim, &group);
            }
        }
        if n > 1 {
            push_group_direction(&mut dirs, dim, &(0..dim).collect::<Vec<_>>());
        }
        dirs
    }
}

fn overlaps<T: Real>(y: &Trajectory<T>, radius: T) -> bool {
    let two_r = radius * T::lit(2.0);
    let floor = two_r - T::lit(1e-9) * two_r;
    (0..y.grid.nodes()).any(|k| {
        (0..y.n).any(|i| (i + 1..y.n).any(|j| (y.at(k, i) - y.at(k, j)).norm() < floor))
    })
}

/// Upper cost of a candidate, or `+∞` when the disks overlap or some lower
/// level has no feasible screening policy.
fn screened_cost<T: Real>(
    scenario: &Scenario<T>,
    param: &UpperParam<T>,
    params: &[T],
    grid: TimeGrid<T>,
    probes: usize,
) -> T {
    let v = param.profile(scenario, params, grid);
    let Ok(y) = integrate_upper(scenario, &v) else {
        return T::infinity();
    };
    if overlaps(&y, scenario.radius) {
        return T::infinity();
    }
    for i in 0..scenario.n() {
        if !lower_feasible(scenario, i, &y.path(i), grid, probes) {
            return T::infinity();
        }
    }
    cost_upper(&y.terminal())
}

/// Multi-start compass search of the penalized objective over upper
/// controls with `coarse_cells` constant pieces.
///
/// Candidates whose lower levels admit no feasible policy are rejected; the
/// returned lower controls are the inner minimizers, so the calmness penalty
/// of the result is zero up to the inner search accuracy.
pub fn solve_bilevel_direct<T: Real>(
    scenario: &Scenario<T>,
    opts: &DirectOptions<T>,
) -> Result<BilevelSolution<T>, BilevelError> {
    let n = scenario.n();
    if opts.coarse_cells < 2 {
        return Err(BilevelError::InvalidOptions("at least two coarse cells are required".into()));
    }
    if opts.fine_cells < opts.coarse_cells || !opts.fine_cells.is_multiple_of(opts.coarse_cells) {
        return Err(BilevelError::InvalidOptions("fine grid must refine the coarse grid".into()));
    }
    let rho = opts.rho.clone().unwrap_or_else(|| scenario.participants.iter().map(|p| p.rho).collect());
    if rho.len() != n || rho.iter().any(|r| !(*r >= T::zero())) {
        return Err(BilevelError::InvalidOptions("one nonnegative modulus per participant is required".into()));
    }
    let grid = TimeGrid::new(scenario.horizon, opts.fine_cells)?;
    let param = UpperParam::new(scenario, opts.coarse_cells);
    let dim = param.dim();
    let dirs = param.directions(n);
    let eval = |x: &[T]| screened_cost(scenario, &param, x, grid, opts.screening_probes);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![T::zero(); dim]];
    for _ in 1..opts.starts.max(1) {
        // Rigid random start: all participants share the cell speeds.
        let draws: Vec<f64> = (0..opts.coarse_cells * 2).map(|_| rng.random::<f64>()).collect();
        let mut x = vec![T::zero(); dim];
        for i in 0..n {
            for c in 0..opts.coarse_cells {
                for j in 0..param.widths[i] {
                    let idx = param.index(i, c, j);
                    let s = T::lit(draws[c * 2 + j.min(1)]);
                    x[idx] = param.lo[idx] + (param.hi[idx] - param.lo[idx]) * s;
                }
            }
        }
        let mut scale = T::one();
        for _ in 0..30 {
            let trial: Vec<T> = x.iter().map(|&v| v * scale).collect();
            if eval(&trial).is_finite() {
                break;
            }
            scale = scale * T::lit(0.5);
        }
        starts.push(x.iter().map(|&v| v * scale).collect());
    }

    let results: Vec<_> = starts
        .par_iter()
        .map(|s| compass_search(eval, s, &param.lo, &param.hi, &dirs, &opts.search))
        .collect();
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value.is_finite())
        .min_by(|(ia, a), (ib, b)| a.value.partial_cmp(&b.value).unwrap().then(ia.cmp(ib)))
        .map(|(_, r)| r)
        .ok_or(BilevelError::NoFeasibleStart)?;

    let v = param.profile(scenario, &best.x, grid);
    let y = integrate_upper(scenario, &v)?;
    let dims = scenario.control_dims();
    let mut u = ControlProfile::zeros(grid, &dims);
    let mut x0 = Vec::with_capacity(n);
    let mut phis = Vec::with_capacity(n);
    for i in 0..n {
        let sol = value_function_on_path(scenario, i, &y.path(i), grid, &opts.inner)?;
        u.values[i] = sol.u;
        x0.push(sol.x0);
        phis.push(sol.phi);
    }
    let mut out = BilevelSolution::assemble(scenario, v, u, x0, Method::Direct)?;
    let penalty = (0..n).fold(T::zero(), |acc, i| acc + rho[i] * (out.j_l[i] - phis[i].min(out.j_l[i])));
    out.penalized = Some(out.j_h + penalty);
    Ok(out)
}
