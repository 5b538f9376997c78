//! Time grids, piecewise-constant control profiles and sampled trajectories.

use crate::dynamics::DynamicsError;
use crate::linalg::Vec2;
use crate::real::Real;

/// Uniform grid `t_k = k·T/K`, `k = 0..=K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    pub horizon: T,
    pub cells: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, cells: usize) -> Result<Self, DynamicsError> {
        if cells == 0 || !(horizon > T::zero()) {
            return Err(DynamicsError::Grid(format!("need K >= 1 and T > 0, got K = {cells}, T = {horizon}")));
        }
        Ok(Self { horizon, cells })
    }

    /// Grid whose step is `h` (`T/h` must be an integer up to 1e-9 relative).
    pub fn with_step(horizon: T, h: T) -> Result<Self, DynamicsError> {
        if !(h > T::zero()) || h > horizon {
            return Err(DynamicsError::Grid(format!("step {h} incompatible with horizon {horizon}")));
        }
        let k = (horizon / h).round();
        if ((k * h - horizon) / horizon).abs() > T::lit(1e-9) {
            return Err(DynamicsError::Grid(format!("horizon {horizon} is not a multiple of step {h}")));
        }
        Self::new(horizon, k.to_usize().unwrap_or(0))
    }

    #[inline]
    pub fn h(&self) -> T {
        self.horizon / T::from_count(self.cells)
    }

    #[inline]
    pub fn t(&self, k: usize) -> T {
        self.horizon * T::from_count(k) / T::from_count(self.cells)
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    /// Index of the cell containing `t` (`[t_k, t_{k+1})`, last cell closed).
    pub fn cell_of(&self, t: T) -> usize {
        let k = (t / self.h()).floor().to_usize().unwrap_or(0);
        k.min(self.cells - 1)
    }
}

/// Piecewise-constant controls, one value per cell and participant.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlProfile<T> {
    pub grid: TimeGrid<T>,
    pub dims: Vec<usize>,
    /// `values[i][k*dims[i] + j]`.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> ControlProfile<T> {
    pub fn zeros(grid: TimeGrid<T>, dims: &[usize]) -> Self {
        Self { grid, dims: dims.to_vec(), values: dims.iter().map(|&m| vec![T::zero(); m * grid.cells]).collect() }
    }

    pub fn from_fn(grid: TimeGrid<T>, dims: &[usize], mut f: impl FnMut(usize, usize) -> Vec<T>) -> Self {
        let mut p = Self::zeros(grid, dims);
        for i in 0..dims.len() {
            for k in 0..grid.cells {
                let v = f(i, k);
                p.set(i, k, &v);
            }
        }
        p
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> &[T] {
        let m = self.dims[i];
        &self.values[i][k * m..(k + 1) * m]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: &[T]) {
        let m = self.dims[i];
        self.values[i][k * m..(k + 1) * m].copy_from_slice(v);
    }

    /// Planar value (upper-level controls).
    #[inline]
    pub fn vec2(&self, i: usize, k: usize) -> Vec2<T> {
        let v = self.get(i, k);
        Vec2::new(v[0], v[1])
    }

    /// Value holding at time `t`.
    pub fn value_at(&self, i: usize, t: T) -> &[T] {
        self.get(i, self.grid.cell_of(t))
    }

    /// Re-expresses the profile on another grid by sampling cell midpoints.
    pub fn resample(&self, grid: TimeGrid<T>) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(grid, &self.dims, |i, k| self.value_at(i, (T::from_count(k) + half) * grid.h()).to_vec())
    }

    /// Profile of participant `i` alone.
    pub fn participant(&self, i: usize) -> Self {
        Self { grid: self.grid, dims: vec![self.dims[i]], values: vec![self.values[i].clone()] }
    }

    /// Same profile with cell order reversed.
    pub fn time_reversed(&self) -> Self {
        let k = self.grid.cells;
        Self::from_fn(self.grid, &self.dims, |i, c| self.get(i, k - 1 - c).to_vec())
    }
}

/// Sampled positions on a grid, one planar point per participant and node.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub grid: TimeGrid<T>,
    pub n: usize,
    /// Node-major: `positions[k*n + i]`.
    pub positions: Vec<Vec2<T>>,
    /// Constraint activity per node (boundary contact for populations,
    /// contact with another disk for disk centers).
    pub contact: Vec<bool>,
    /// Normal-cone correction applied over each cell (`corrections[k*n + i]`);
    /// zero for upper-level paths.
    pub corrections: Vec<Vec2<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(grid: TimeGrid<T>, n: usize) -> Self {
        Self {
            grid,
            n,
            positions: vec![Vec2::zero(); grid.nodes() * n],
            contact: vec![false; grid.nodes() * n],
            corrections: vec![Vec2::zero(); grid.cells * n],
        }
    }

    #[inline]
    pub fn at(&self, k: usize, i: usize) -> Vec2<T> {
        self.positions[k * self.n + i]
    }

    #[inline]
    pub fn in_contact(&self, k: usize, i: usize) -> bool {
        self.contact[k * self.n + i]
    }

    #[inline]
    pub fn correction(&self, k: usize, i: usize) -> Vec2<T> {
        self.corrections[k * self.n + i]
    }

    pub fn terminal(&self) -> Vec<Vec2<T>> {
        (0..self.n).map(|i| self.at(self.grid.cells, i)).collect()
    }

    /// Path of one participant.
    pub fn path(&self, i: usize) -> Vec<Vec2<T>> {
        (0..self.grid.nodes()).map(|k| self.at(k, i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|p| p.is_finite())
    }

    /// Position at time `t`, linearly interpolated between nodes.
    pub fn interpolate(&self, i: usize, t: T) -> Vec2<T> {
        let h = self.grid.h();
        let k = self.grid.cell_of(t);
        let s = ((t - T::from_count(k) * h) / h).clamp_to(T::zero(), T::one());
        self.at(k, i) * (T::one() - s) + self.at(k + 1, i) * s
    }
}
