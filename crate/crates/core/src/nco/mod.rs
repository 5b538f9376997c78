//! Residual checks of the first-order optimality system on a grid, and a
//! witness search for the multipliers.
//!
//! Costates are nodal values. Measure-type multipliers are right-continuous
//! step functions: node `k` holds the value on `[t_k, t_{k+1})` and node `K`
//! the terminal value, so total variation is the sum of absolute jumps.

mod fit;
mod hamiltonian;
mod residuals;
mod verify;

pub use fit::{fd_subgradient, fit_multipliers, FitOptions, FitResult};
pub use hamiltonian::{control_sup, hamiltonian_lower, hamiltonian_upper, ControlSup, UpperPoint};
pub use residuals::{
    adjoint_residual, boundary_residual, lower_relation, max_condition_lower, max_condition_upper,
    monotonicity_residual, AdjointResidual, LowerResiduals, SubgradientSource,
};
pub use verify::{verify, Check, LowerReport, NcoReport, Nontriviality, NONTRIVIALITY_FLOOR, REP_TOL};

use crate::bilevel::BilevelError;
use crate::dynamics::{DynamicsError, TimeGrid};
use crate::geometry::GeometryError;
use crate::linalg::Vec2;
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NcoError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Bilevel(#[from] BilevelError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no participant {0}")]
    Participant(usize),
    #[error("candidate fails the feasibility audit (worst violation {violation})")]
    Precondition { violation: f64 },
    #[error("participant {participant}: no value-function subgradient available (witness has zero cost multiplier)")]
    IndeterminateWitness { participant: usize },
}

/// Symmetric pairwise paths with zero diagonal; only `i < j` is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct PairPaths<T> {
    n: usize,
    nodes: usize,
    data: Vec<Vec<T>>,
}

impl<T: Real> PairPaths<T> {
    pub fn zeros(n: usize, nodes: usize) -> Self {
        Self { n, nodes, data: vec![vec![T::zero(); nodes]; n * n.saturating_sub(1) / 2] }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        (a != b && b < self.n).then(|| a * (2 * self.n - a - 1) / 2 + (b - a - 1))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s][k])
    }

    /// Path of the pair `{i, j}` (None on the diagonal).
    pub fn path(&self, i: usize, j: usize) -> Option<&[T]> {
        self.slot(i, j).map(|s| self.data[s].as_slice())
    }

    pub fn set_path(&mut self, i: usize, j: usize, values: Vec<T>) -> Result<(), NcoError> {
        if values.len() != self.nodes {
            return Err(NcoError::Dimension(format!("pair path needs {} nodes", self.nodes)));
        }
        let s = self.slot(i, j).ok_or_else(|| NcoError::Dimension(format!("no pair ({i}, {j})")))?;
        self.data[s] = values;
        Ok(())
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }

    fn scale(&mut self, s: T) {
        self.data.iter_mut().flatten().for_each(|v| *v = *v * s);
    }
}

/// Upper-level multipliers.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperMultipliers<T> {
    pub grid: TimeGrid<T>,
    pub n: usize,
    /// Node-major `q_h[k*n + i]`.
    pub q_h: Vec<Vec2<T>>,
    pub q_l: Vec<Vec2<T>>,
    pub nu_h: PairPaths<T>,
    /// `nu_l[i][k]`.
    pub nu_l: Vec<Vec<T>>,
    pub lambda: T,
    pub alpha: Vec<T>,
}

impl<T: Real> UpperMultipliers<T> {
    pub fn zeros(grid: TimeGrid<T>, n: usize) -> Self {
        let nodes = grid.nodes();
        Self {
            grid,
            n,
            q_h: vec![Vec2::zero(); nodes * n],
            q_l: vec![Vec2::zero(); nodes * n],
            nu_h: PairPaths::zeros(n, nodes),
            nu_l: vec![vec![T::zero(); nodes]; n],
            lambda: T::zero(),
            alpha: vec![T::zero(); n],
        }
    }

    #[inline]
    pub fn q_h(&self, k: usize, i: usize) -> Vec2<T> {
        self.q_h[k * self.n + i]
    }

    #[inline]
    pub fn q_l(&self, k: usize, i: usize) -> Vec2<T> {
        self.q_l[k * self.n + i]
    }

    /// Multiplies every multiplier by `s` (`α` included).
    pub fn scale(&mut self, s: T) {
        self.q_h.iter_mut().chain(self.q_l.iter_mut()).for_each(|q| *q = *q * s);
        self.nu_h.scale(s);
        self.nu_l.iter_mut().flatten().for_each(|v| *v = *v * s);
        self.lambda = self.lambda * s;
        self.alpha.iter_mut().for_each(|a| *a = *a * s);
    }

    pub(crate) fn check_shape(&self, grid: &TimeGrid<T>, n: usize) -> Result<(), NcoError> {
        let nodes = grid.nodes();
        let ok = self.grid.cells == grid.cells
            && self.n == n
            && self.q_h.len() == nodes * n
            && self.q_l.len() == nodes * n
            && self.nu_l.len() == n
            && self.nu_l.iter().all(|p| p.len() == nodes)
            && self.nu_h.n == n
            && self.nu_h.nodes == nodes
            && self.alpha.len() == n;
        if ok {
            Ok(())
        } else {
            Err(NcoError::Dimension("upper multipliers do not match the solution grid".into()))
        }
    }
}

/// Multipliers of one participant's lower-level relation.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerWitness<T> {
    pub p_h: Vec<Vec2<T>>,
    pub p_l: Vec<Vec2<T>>,
    /// `mu_h[j][k]`; the own entry `j = i` is ignored.
    pub mu_h: Vec<Vec<T>>,
    pub mu_l: Vec<T>,
    pub lambda_bar: T,
    /// Subgradient path (one value per cell); `None` when `λ̄ = 0`.
    pub zeta: Option<Vec<Vec2<T>>>,
}

impl<T: Real> LowerWitness<T> {
    pub fn zeros(nodes: usize, n: usize) -> Self {
        Self {
            p_h: vec![Vec2::zero(); nodes],
            p_l: vec![Vec2::zero(); nodes],
            mu_h: vec![vec![T::zero(); nodes]; n],
            mu_l: vec![T::zero(); nodes],
            lambda_bar: T::zero(),
            zeta: None,
        }
    }

    pub fn scale(&mut self, s: T) {
        self.p_h.iter_mut().chain(self.p_l.iter_mut()).for_each(|p| *p = *p * s);
        self.mu_h.iter_mut().flatten().for_each(|v| *v = *v * s);
        self.mu_l.iter_mut().for_each(|v| *v = *v * s);
        self.lambda_bar = self.lambda_bar * s;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerMultipliers<T> {
    pub grid: TimeGrid<T>,
    pub witnesses: Vec<LowerWitness<T>>,
    /// Central-difference estimate of each value-function subgradient (one
    /// value per cell), used where a witness carries no `ζ`.
    pub fd_subgradient: Option<Vec<Vec<Vec2<T>>>>,
}

impl<T: Real> LowerMultipliers<T> {
    pub fn zeros(grid: TimeGrid<T>, n: usize) -> Self {
        Self { grid, witnesses: vec![LowerWitness::zeros(grid.nodes(), n); n], fd_subgradient: None }
    }
}

/// Sum of absolute jumps of a step path.
pub fn total_variation<T: Real>(path: &[T]) -> T {
    path.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
