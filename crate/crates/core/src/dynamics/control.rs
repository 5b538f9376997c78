//! Control sets and drift families.

use crate::linalg::{Mat2, Vec2};
use crate::real::Real;

/// Compact convex control set.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlSetSpec<T> {
    /// Box `Π [lo_j, hi_j]`; its dimension is the number of coordinates.
    Interval { lo: Vec<T>, hi: Vec<T> },
    /// Planar segment `{a·direction : |a| ≤ halflength}`.
    Segment { direction: Vec2<T>, halflength: T },
    /// Centered closed ball of the given dimension.
    Ball { dim: usize, radius: T },
}

/// Relative tolerance for deciding which face of a control set is active.
const FACE_REL_TOL: f64 = 1e-9;

impl<T: Real> ControlSetSpec<T> {
    pub fn interval(lo: T, hi: T) -> Self {
        Self::Interval { lo: vec![lo], hi: vec![hi] }
    }

    /// Segment along `direction` (normalized here).
    pub fn segment(direction: Vec2<T>, halflength: T) -> Self {
        let direction = direction.normalized().unwrap_or(direction);
        Self::Segment { direction, halflength }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Interval { lo, .. } => lo.len(),
            Self::Segment { .. } => 2,
            Self::Ball { dim, .. } => *dim,
        }
    }

    /// Checks the defining parameters; returns a description of the first problem.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Self::Interval { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(format!("interval bounds have lengths {} and {}", lo.len(), hi.len()));
                }
                for (j, (&a, &b)) in lo.iter().zip(hi).enumerate() {
                    if !a.is_finite() || !b.is_finite() || a > b {
                        return Err(format!("coordinate {j}: need finite lo <= hi, got [{a}, {b}]"));
                    }
                }
            }
            Self::Segment { direction, halflength } => {
                if !direction.is_finite() || (direction.norm() - T::one()).abs() > T::lit(1e-6) {
                    return Err("segment direction must be a unit vector".into());
                }
                if !halflength.is_finite() || *halflength < T::zero() {
                    return Err(format!("segment halflength must be finite and >= 0, got {halflength}"));
                }
            }
            Self::Ball { dim, radius } => {
                if *dim == 0 {
                    return Err("ball dimension must be positive".into());
                }
                if !radius.is_finite() || *radius < T::zero() {
                    return Err(format!("ball radius must be finite and >= 0, got {radius}"));
                }
            }
        }
        Ok(())
    }

    /// Largest absolute coordinate of any element (used for scale-aware tolerances).
    pub fn extent(&self) -> T {
        match self {
            Self::Interval { lo, hi } => lo.iter().chain(hi).fold(T::zero(), |m, v| m.max(v.abs())),
            Self::Segment { halflength, .. } => *halflength,
            Self::Ball { radius, .. } => *radius,
        }
    }

    fn face_tol(&self) -> T {
        T::lit(FACE_REL_TOL) * (T::one() + self.extent())
    }

    pub fn project(&self, u: &[T]) -> Vec<T> {
        match self {
            Self::Interval { lo, hi } => u.iter().zip(lo.iter().zip(hi)).map(|(&v, (&a, &b))| v.clamp_to(a, b)).collect(),
            Self::Segment { direction, halflength } => {
                let a = (u[0] * direction.x + u[1] * direction.y).clamp_to(-*halflength, *halflength);
                vec![a * direction.x, a * direction.y]
            }
            Self::Ball { radius, .. } => {
                let n = norm(u);
                if n <= *radius {
                    u.to_vec()
                } else {
                    u.iter().map(|&v| v * (*radius / n)).collect()
                }
            }
        }
    }

    pub fn distance(&self, u: &[T]) -> T {
        let p = self.project(u);
        norm_diff(u, &p)
    }

    pub fn contains(&self, u: &[T], tol: T) -> bool {
        u.len() == self.dim() && self.distance(u) <= tol
    }

    /// Support function `sup_{u ∈ C} ⟨w, u⟩`.
    pub fn support(&self, w: &[T]) -> T {
        dot(w, &self.support_point(w))
    }

    /// One maximizer of `⟨w, ·⟩` over the set.
    pub fn support_point(&self, w: &[T]) -> Vec<T> {
        match self {
            Self::Interval { lo, hi } => w
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&g, (&a, &b))| if g > T::zero() { b } else if g < T::zero() { a } else { (a + b) * T::lit(0.5) })
                .collect(),
            Self::Segment { direction, halflength } => {
                let s = w[0] * direction.x + w[1] * direction.y;
                let a = if s > T::zero() { *halflength } else if s < T::zero() { -*halflength } else { T::zero() };
                vec![a * direction.x, a * direction.y]
            }
            Self::Ball { radius, dim } => {
                let n = norm(w);
                if n > T::zero() {
                    w.iter().map(|&g| g * (*radius / n)).collect()
                } else {
                    vec![T::zero(); *dim]
                }
            }
        }
    }

    /// Distance from `w` to the normal cone of the set at `v` (projected onto the set first).
    pub fn normal_cone_distance(&self, v: &[T], w: &[T]) -> T {
        let v = self.project(v);
        let tol = self.face_tol();
        match self {
            Self::Interval { lo, hi } => {
                let mut acc = T::zero();
                for j in 0..lo.len() {
                    let at_lo = v[j] <= lo[j] + tol;
                    let at_hi = v[j] >= hi[j] - tol;
                    let allowed = match (at_lo, at_hi) {
                        (true, true) => w[j],
                        (true, false) => w[j].min(T::zero()),
                        (false, true) => w[j].max(T::zero()),
                        (false, false) => T::zero(),
                    };
                    acc = acc + (w[j] - allowed).powi(2);
                }
                acc.sqrt()
            }
            Self::Segment { direction, halflength } => {
                if *halflength <= tol {
                    return T::zero();
                }
                let c = v[0] * direction.x + v[1] * direction.y;
                let wd = w[0] * direction.x + w[1] * direction.y;
                if c >= *halflength - tol {
                    (-wd).max(T::zero())
                } else if c <= -*halflength + tol {
                    wd.max(T::zero())
                } else {
                    wd.abs()
                }
            }
            Self::Ball { radius, .. } => {
                if *radius <= tol {
                    return T::zero();
                }
                let nv = norm(&v);
                if nv < *radius - tol {
                    return norm(w);
                }
                let s = dot(w, &v) / nv;
                if s >= T::zero() {
                    (norm(w).powi(2) - s * s).max(T::zero()).sqrt()
                } else {
                    norm(w)
                }
            }
        }
    }

    /// Bounding box `(lo, hi)` per coordinate.
    pub fn bounding_box(&self) -> (Vec<T>, Vec<T>) {
        match self {
            Self::Interval { lo, hi } => (lo.clone(), hi.clone()),
            Self::Segment { direction, halflength } => {
                let ex = direction.x.abs() * *halflength;
                let ey = direction.y.abs() * *halflength;
                (vec![-ex, -ey], vec![ex, ey])
            }
            Self::Ball { dim, radius } => (vec![-*radius; *dim], vec![*radius; *dim]),
        }
    }

    /// The element of smallest norm.
    pub fn least_norm_point(&self) -> Vec<T> {
        self.project(&vec![T::zero(); self.dim()])
    }

    pub fn cast<U: Real>(&self) -> ControlSetSpec<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::lit(x.to_f64_lossy())).collect();
        match self {
            Self::Interval { lo, hi } => ControlSetSpec::Interval { lo: c(lo), hi: c(hi) },
            Self::Segment { direction, halflength } => {
                ControlSetSpec::Segment { direction: direction.cast(), halflength: U::lit(halflength.to_f64_lossy()) }
            }
            Self::Ball { dim, radius } => ControlSetSpec::Ball { dim: *dim, radius: U::lit(radius.to_f64_lossy()) },
        }
    }
}

/// Drift family `f(x, u)`; every supported family is affine in `u`:
/// `f(x, u) = f₀(x) + G(x) u`.
#[derive(Clone, Debug, PartialEq)]
pub enum DriftSpec<T> {
    /// `f(x, u) = c·u·x` with scalar `u`.
    ScaledLinear { c: T },
    /// `f(x, u) = A x + B u + b`; `b_cols` are the columns of `B`.
    Affine { a: Mat2<T>, b_cols: Vec<Vec2<T>>, offset: Vec2<T> },
}

impl<T: Real> DriftSpec<T> {
    pub fn control_dim(&self) -> usize {
        match self {
            Self::ScaledLinear { .. } => 1,
            Self::Affine { b_cols, .. } => b_cols.len(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Self::ScaledLinear { c } if !c.is_finite() => Err("scaled_linear coefficient must be finite".into()),
            Self::Affine { a, b_cols, offset } => {
                if b_cols.is_empty() || b_cols.len() > 2 {
                    return Err(format!("affine drift needs 1 or 2 control columns, got {}", b_cols.len()));
                }
                if !a.is_finite() || !offset.is_finite() || b_cols.iter().any(|c| !c.is_finite()) {
                    return Err("affine drift parameters must be finite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Control-independent part `f₀(x)`.
    #[inline]
    pub fn base(&self, x: Vec2<T>) -> Vec2<T> {
        match self {
            Self::ScaledLinear { .. } => Vec2::zero(),
            Self::Affine { a, offset, .. } => a.mul_vec(x) + *offset,
        }
    }

    /// Column `j` of `G(x)`.
    #[inline]
    pub fn column(&self, x: Vec2<T>, j: usize) -> Vec2<T> {
        match self {
            Self::ScaledLinear { c } => x * *c,
            Self::Affine { b_cols, .. } => b_cols[j],
        }
    }

    #[inline]
    pub fn eval(&self, x: Vec2<T>, u: &[T]) -> Vec2<T> {
        let mut f = self.base(x);
        for (j, &uj) in u.iter().enumerate() {
            f += self.column(x, j) * uj;
        }
        f
    }

    /// `Gᵀ(x) w`, the gradient in `u` of `⟨w, f(x, u)⟩`.
    pub fn control_gradient(&self, x: Vec2<T>, w: Vec2<T>) -> Vec<T> {
        (0..self.control_dim()).map(|j| self.column(x, j).dot(w)).collect()
    }

    /// Jacobian `∂ₓ f(x, u)` (independent of `x` for the supported families).
    #[inline]
    pub fn jac_x(&self, u: &[T]) -> Mat2<T> {
        match self {
            Self::ScaledLinear { c } => Mat2::identity().scaled(*c * u[0]),
            Self::Affine { a, .. } => *a,
        }
    }

    pub fn cast<U: Real>(&self) -> DriftSpec<U> {
        match self {
            Self::ScaledLinear { c } => DriftSpec::ScaledLinear { c: U::lit(c.to_f64_lossy()) },
            Self::Affine { a, b_cols, offset } => DriftSpec::Affine {
                a: Mat2 { m: a.m.map(|r| r.map(|v| U::lit(v.to_f64_lossy()))) },
                b_cols: b_cols.iter().map(|c| c.cast()).collect(),
                offset: offset.cast(),
            },
        }
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

#[inline]
pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn norm_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y)).sqrt()
}
