//! Disk constraint sets, truncated normal cones, and the algebraic kernels
//! (pairwise contact Jacobian, blockwise product, cone support function)
//! that appear in the optimality system.
//!
//! Every constraint set in the crowd model is a translated disk, so the
//! limiting normal cone reduces to the convex one: `{0}` in the interior and
//! the outward radial ray on the boundary.

use thiserror::Error;

use crate::linalg::{Mat2, Vec2};
use crate::real::Real;

/// Relative active-set tolerance: a point is on the boundary when its
/// distance to the center is within `ACTIVE_REL_TOL * radius` of the radius.
pub const ACTIVE_REL_TOL: f64 = 1e-9;

/// Relative tolerance under which the cone support function is treated as
/// sitting on its kink.
pub const KINK_REL_TOL: f64 = 1e-8;

/// Step of the central finite-difference fallback used at kinks.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point at distance {distance} from the center lies outside the disk of radius {radius}")]
    InfeasiblePoint { distance: f64, radius: f64 },
    #[error("coincident disk centers make the pairwise direction undefined")]
    SingularConfiguration,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("disk radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk<T> {
    pub center: Vec2<T>,
    pub radius: T,
}

impl<T: Real> Disk<T> {
    pub fn new(center: Vec2<T>, radius: T) -> Result<Self, GeometryError> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(GeometryError::NonPositiveRadius(radius.to_f64_lossy()));
        }
        Ok(Self { center, radius })
    }

    /// Active-set tolerance for this disk.
    #[inline]
    pub fn eps_act(&self) -> T {
        T::lit(ACTIVE_REL_TOL) * self.radius
    }

    #[inline]
    pub fn contains(&self, x: Vec2<T>) -> bool {
        (x - self.center).norm() <= self.radius + self.eps_act()
    }

    #[inline]
    pub fn on_boundary(&self, x: Vec2<T>) -> bool {
        let d = (x - self.center).norm();
        d >= self.radius - self.eps_act() && d <= self.radius + self.eps_act()
    }

    /// Same disk translated by `offset`.
    #[inline]
    pub fn translated(&self, offset: Vec2<T>) -> Self {
        Self { center: self.center + offset, radius: self.radius }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConeKind<T> {
    /// Interior point: the cone is `{0}`.
    Zero,
    /// Boundary point: the ray spanned by the unit outward normal.
    Ray(Vec2<T>),
}

/// `N_A(z) ∩ cap·B₁(0)` for a disk `A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSection<T> {
    pub kind: ConeKind<T>,
    pub cap: T,
}

impl<T: Real> ConeSection<T> {
    pub fn direction(&self) -> Option<Vec2<T>> {
        match self.kind {
            ConeKind::Zero => None,
            ConeKind::Ray(n) => Some(n),
        }
    }

    /// Whether `xi` belongs to the truncated cone, up to `tol`.
    pub fn contains(&self, xi: Vec2<T>, tol: T) -> bool {
        match self.kind {
            ConeKind::Zero => xi.norm() <= tol,
            ConeKind::Ray(n) => {
                let s = xi.dot(n);
                s >= -tol && s <= self.cap + tol && (xi - n * s).norm() <= tol
            }
        }
    }
}

/// Truncated limiting normal cone of `disk` at `x`.
pub fn truncated_normal_cone<T: Real>(
    disk: &Disk<T>,
    x: Vec2<T>,
    cap: T,
) -> Result<ConeSection<T>, GeometryError> {
    let offset = x - disk.center;
    let d = offset.norm();
    let eps = disk.eps_act();
    if d > disk.radius + eps {
        return Err(GeometryError::InfeasiblePoint {
            distance: d.to_f64_lossy(),
            radius: disk.radius.to_f64_lossy(),
        });
    }
    if d < disk.radius - eps {
        return Ok(ConeSection { kind: ConeKind::Zero, cap });
    }
    Ok(ConeSection { kind: ConeKind::Ray(offset * (T::one() / d)), cap })
}

/// Closest point of `disk` to `x`.
pub fn project_to_disk<T: Real>(disk: &Disk<T>, x: Vec2<T>) -> Vec2<T> {
    let offset = x - disk.center;
    let d = offset.norm();
    if d <= disk.radius {
        x
    } else {
        disk.center + offset * (disk.radius / d)
    }
}

/// `‖d‖⁻¹ I − d dᵀ / ‖d‖³` with `d = y_i − y_j`: the derivative of the unit
/// pair direction `d / ‖d‖` with respect to `y_i`.
pub fn contact_jacobian<T: Real>(y_i: Vec2<T>, y_j: Vec2<T>) -> Result<Mat2<T>, GeometryError> {
    let d = y_i - y_j;
    let r = d.norm();
    if !(r > T::zero()) {
        return Err(GeometryError::SingularConfiguration);
    }
    let inv = T::one() / r;
    Ok(Mat2::identity().scaled(inv) - d.outer(d).scaled(inv * inv * inv))
}

/// Unit direction `(y_i − y_j) / ‖y_i − y_j‖`.
pub fn pair_direction<T: Real>(y_i: Vec2<T>, y_j: Vec2<T>) -> Result<Vec2<T>, GeometryError> {
    (y_i - y_j).normalized().ok_or(GeometryError::SingularConfiguration)
}

/// Blockwise product: block `i` of the result is `a[i]` times block `i` of `b`,
/// with block length `b.len() / a.len()`.
pub fn diamond<T: Real>(a: &[T], b: &[T]) -> Result<Vec<T>, GeometryError> {
    if a.is_empty() || b.is_empty() || !b.len().is_multiple_of(a.len()) {
        return Err(GeometryError::Dimension(format!(
            "cannot split {} entries into {} blocks",
            b.len(),
            a.len()
        )));
    }
    let m = b.len() / a.len();
    Ok(b.chunks(m).zip(a).flat_map(|(blk, &s)| blk.iter().map(move |&v| s * v)).collect())
}

/// `diamond` specialised to planar blocks.
pub fn diamond_vec2<T: Real>(a: &[T], b: &[Vec2<T>]) -> Result<Vec<Vec2<T>>, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::Dimension(format!(
            "{} scalars for {} planar blocks",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(&s, &v)| v * s).collect())
}

/// Switching function of the cone support: `−⟨q − ν·z, z/‖z‖⟩`.
#[inline]
fn support_switch<T: Real>(offset: Vec2<T>, q: Vec2<T>, nu: T) -> Option<T> {
    let n = offset.normalized()?;
    Some(-(q - offset * nu).dot(n))
}

/// Supremum of `⟨q − ν(x−y), ξ⟩` over `ξ ∈ −N^cap_D(x − y)` where `D` is the
/// centered disk of the given radius and `offset = x − y`.
///
/// On the boundary the admissible set is the segment `{−s·n : s ∈ [0, cap]}`,
/// so the supremum is `cap · max(0, −⟨q − ν·offset, n⟩)`.
pub fn sigma_support<T: Real>(
    offset: Vec2<T>,
    q: Vec2<T>,
    nu: T,
    radius: T,
    cap: T,
) -> Result<T, GeometryError> {
    let disk = Disk::new(Vec2::zero(), radius)?;
    match truncated_normal_cone(&disk, offset, cap)?.kind {
        ConeKind::Zero => Ok(T::zero()),
        ConeKind::Ray(n) => Ok(cap * (-(q - offset * nu).dot(n)).max(T::zero())),
    }
}

/// Boundary expression of [`sigma_support`] extended off the boundary:
/// `cap · max(0, −⟨q − ν z, z/‖z‖⟩)`. This is the smooth-piece function whose
/// gradients feed the adjoint equations.
pub fn sigma_boundary_extension<T: Real>(offset: Vec2<T>, q: Vec2<T>, nu: T, cap: T) -> T {
    support_switch(offset, q, nu).map_or(T::zero(), |s| cap * s.max(T::zero()))
}

/// Clarke subgradient of the cone support with respect to `x` (the `y`
/// subgradient is its negative), represented as `{θ·grad : θ ∈ [theta_lo, theta_hi]}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaSubgradient<T> {
    /// `cap · ∇_z(−⟨q − ν z, z/‖z‖⟩)` on the active piece.
    pub grad: Vec2<T>,
    pub theta_lo: T,
    pub theta_hi: T,
    /// Set when the contact direction is undefined (`x = y`); the zero
    /// selection is returned.
    pub degenerate: bool,
}

impl<T: Real> SigmaSubgradient<T> {
    pub fn zero() -> Self {
        Self { grad: Vec2::zero(), theta_lo: T::zero(), theta_hi: T::zero(), degenerate: false }
    }

    #[inline]
    pub fn at(&self, theta: T) -> Vec2<T> {
        self.grad * theta.clamp_to(self.theta_lo, self.theta_hi)
    }

    #[inline]
    pub fn is_kink(&self) -> bool {
        self.theta_hi > self.theta_lo
    }

    /// Representative element: the closed-form selection on smooth pieces and
    /// the midpoint of the Clarke interval at a kink (which is what a central
    /// difference of the extension returns).
    pub fn representative(&self) -> Vec2<T> {
        self.at((self.theta_lo + self.theta_hi) * T::lit(0.5))
    }
}

/// Subgradient of the cone support in `x`.
///
/// `on_boundary` selects the active piece; interior points have σ ≡ 0 and
/// return the zero selection.
pub fn sigma_subgradient<T: Real>(
    offset: Vec2<T>,
    q: Vec2<T>,
    nu: T,
    cap: T,
    on_boundary: bool,
) -> SigmaSubgradient<T> {
    if !on_boundary {
        return SigmaSubgradient::zero();
    }
    let r = offset.norm();
    if !(r > T::zero()) {
        return SigmaSubgradient { degenerate: true, ..SigmaSubgradient::zero() };
    }
    let n = offset * (T::one() / r);
    let switch = -(q - offset * nu).dot(n);
    // ∇_z(−⟨q,z⟩/‖z‖ + ν‖z‖) = −(q − ⟨q,n⟩n)/‖z‖ + ν n
    let tangential = q - n * q.dot(n);
    let grad = (n * nu - tangential * (T::one() / r)) * cap;
    let scale = T::one() + q.norm() + (offset * nu).norm();
    let kink_tol = T::lit(KINK_REL_TOL) * scale;
    let (lo, hi) = if switch > kink_tol {
        (T::one(), T::one())
    } else if switch < -kink_tol {
        (T::zero(), T::zero())
    } else {
        (T::zero(), T::one())
    };
    SigmaSubgradient { grad, theta_lo: lo, theta_hi: hi, degenerate: false }
}

/// Central finite-difference gradient of [`sigma_boundary_extension`] in `x`.
pub fn sigma_gradient_fd<T: Real>(offset: Vec2<T>, q: Vec2<T>, nu: T, cap: T, step: T) -> Vec2<T> {
    let f = |z: Vec2<T>| sigma_boundary_extension(z, q, nu, cap);
    let ex = Vec2::new(step, T::zero());
    let ey = Vec2::new(T::zero(), step);
    let two_h = step + step;
    Vec2::new(
        (f(offset + ex) - f(offset - ex)) / two_h,
        (f(offset + ey) - f(offset - ey)) / two_h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn disk(cx: f64, cy: f64, r: f64) -> Disk<f64> {
        Disk::new(Vec2::new(cx, cy), r).unwrap()
    }

    #[test]
    fn cone_interior_is_zero() {
        let c = truncated_normal_cone(&disk(0.0, 0.0, 3.0), Vec2::new(1.0, 0.0), 6.0).unwrap();
        assert_eq!(c.kind, ConeKind::Zero);
    }

    #[test]
    fn cone_boundary_is_radial() {
        let c = truncated_normal_cone(&disk(0.0, 0.0, 3.0), Vec2::new(3.0, 0.0), 6.0).unwrap();
        assert_eq!(c.kind, ConeKind::Ray(Vec2::new(1.0, 0.0)));
        assert_eq!(c.cap, 6.0);
    }

    #[test]
    fn cone_on_translated_disk() {
        let h = 2f64.sqrt() / 2.0;
        let d = disk(-48.0, 48.0, 3.0);
        let x = d.center + Vec2::new(-h, h) * 3.0;
        let c = truncated_normal_cone(&d, x, 6.0).unwrap();
        let n = c.direction().unwrap();
        assert_abs_diff_eq!(n.x, -h, epsilon = 1e-12);
        assert_abs_diff_eq!(n.y, h, epsilon = 1e-12);
    }

    #[test]
    fn cone_rejects_outside_point() {
        let err = truncated_normal_cone(&disk(0.0, 0.0, 3.0), Vec2::new(3.1, 0.0), 6.0);
        assert!(matches!(err, Err(GeometryError::InfeasiblePoint { .. })));
    }

    #[test]
    fn cone_membership() {
        let c = ConeSection { kind: ConeKind::Ray(Vec2::new(1.0, 0.0)), cap: 6.0 };
        assert!(c.contains(Vec2::new(5.0, 0.0), 1e-12));
        assert!(!c.contains(Vec2::new(7.0, 0.0), 1e-12));
        assert!(!c.contains(Vec2::new(-1.0, 0.0), 1e-12));
        assert!(!c.contains(Vec2::new(1.0, 1.0), 1e-12));
    }

    #[test]
    fn projection_examples() {
        let d = disk(0.0, 0.0, 3.0);
        assert_eq!(project_to_disk(&d, Vec2::new(1.0, 1.0)), Vec2::new(1.0, 1.0));
        assert_eq!(project_to_disk(&d, Vec2::new(6.0, 0.0)), Vec2::new(3.0, 0.0));
        assert_eq!(project_to_disk(&disk(2.0, 0.0, 3.0), Vec2::new(-4.0, 0.0)), Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn contact_jacobian_examples() {
        let m = contact_jacobian(Vec2::new(6.0, 0.0), Vec2::zero()).unwrap();
        assert_abs_diff_eq!(m.m[0][0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m[0][1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m[1][0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m[1][1], 1.0 / 6.0, epsilon = 1e-15);
        let m = contact_jacobian(Vec2::new(1.0, 7.0), Vec2::new(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(m.m[0][0], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m[1][1], 0.0, epsilon = 1e-15);
        assert_eq!(
            contact_jacobian(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)),
            Err(GeometryError::SingularConfiguration)
        );
    }

    #[test]
    fn contact_jacobian_is_directional_derivative() {
        // Oracle: finite differences of y ↦ (y − y_j)/‖y − y_j‖.
        let yi = Vec2::new(2.0, -1.0);
        let yj = Vec2::new(-1.5, 0.5);
        let m = contact_jacobian(yi, yj).unwrap();
        let h = 1e-6;
        for (k, e) in [Vec2::new(h, 0.0), Vec2::new(0.0, h)].into_iter().enumerate() {
            let fd = (pair_direction(yi + e, yj).unwrap() - pair_direction(yi - e, yj).unwrap())
                * (1.0 / (2.0 * h));
            let col = Vec2::new(m.m[0][k], m.m[1][k]);
            assert_abs_diff_eq!((fd - col).norm(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn diamond_examples() {
        assert_eq!(diamond(&[1.0, 1.0], &[3.0, 4.0, 5.0, 6.0]).unwrap(), vec![3.0, 4.0, 5.0, 6.0]);
        assert_eq!(diamond(&[2.0, 0.0], &[1.0, 1.0, 7.0, 7.0]).unwrap(), vec![2.0, 2.0, 0.0, 0.0]);
        assert!(diamond(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(diamond::<f64>(&[], &[1.0]).is_err());
    }

    #[test]
    fn diamond_matches_blockwise_expansion() {
        // Oracle: explicit loop over blocks of length 2.
        let nu = [0.5, 2.0];
        let x = [Vec2::new(1.0, 2.0), Vec2::new(-3.0, 0.25)];
        let y = [Vec2::new(0.5, 0.0), Vec2::new(1.0, -1.0)];
        let stacked: Vec<f64> = x.iter().zip(&y).flat_map(|(a, b)| [a.x - b.x, a.y - b.y]).collect();
        let got = diamond(&nu, &stacked).unwrap();
        let mut expect = Vec::new();
        for i in 0..2 {
            expect.push(nu[i] * (x[i].x - y[i].x));
            expect.push(nu[i] * (x[i].y - y[i].y));
        }
        assert_eq!(got, expect);
        let planar = diamond_vec2(&nu, &[x[0] - y[0], x[1] - y[1]]).unwrap();
        assert_eq!(planar[1], Vec2::new(expect[2], expect[3]));
    }

    #[test]
    fn sigma_examples() {
        let q = Vec2::new(-1.0, 0.0);
        assert_eq!(sigma_support(Vec2::new(1.0, 0.0), q, 0.0, 3.0, 6.0).unwrap(), 0.0);
        assert_eq!(sigma_support(Vec2::new(3.0, 0.0), q, 0.0, 3.0, 6.0).unwrap(), 6.0);
        assert_eq!(sigma_support(Vec2::new(3.0, 0.0), -q, 0.0, 3.0, 6.0).unwrap(), 0.0);
        assert!(sigma_support(Vec2::new(4.0, 0.0), q, 0.0, 3.0, 6.0).is_err());
    }

    #[test]
    fn sigma_matches_segment_enumeration() {
        // Oracle: maximize over a fine sampling of the segment {−s n : s ∈ [0, cap]}.
        let z = Vec2::new(3.0f64, 0.0).rotated(0.7);
        let n = z.normalized().unwrap();
        for (q, nu) in [(Vec2::new(-2.0, 0.5), 0.3), (Vec2::new(1.0, 1.0), 0.0), (Vec2::new(0.2, -3.0), 1.5)] {
            let brute = (0..=6000)
                .map(|k| {
                    let xi = n * (-(k as f64) * 6.0 / 6000.0);
                    (q - z * nu).dot(xi)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let got = sigma_support(z, q, nu, 3.0, 6.0).unwrap();
            assert_abs_diff_eq!(got, brute, epsilon = 1e-9);
        }
    }

    #[test]
    fn sigma_gradient_pieces() {
        let z = Vec2::new(3.0, 0.0);
        let active = sigma_subgradient(z, Vec2::new(-1.0, 0.5), 0.0, 6.0, true);
        assert!(!active.is_kink());
        assert_eq!(active.theta_lo, 1.0);
        let inactive = sigma_subgradient(z, Vec2::new(1.0, 0.5), 0.0, 6.0, true);
        assert_eq!(inactive.representative(), Vec2::zero());
        let kink = sigma_subgradient(z, Vec2::new(0.0, 0.5), 0.0, 6.0, true);
        assert!(kink.is_kink());
        let fd = sigma_gradient_fd(z, Vec2::new(0.0, 0.5), 0.0, 6.0, FD_STEP);
        assert_abs_diff_eq!((fd - kink.representative()).norm(), 0.0, epsilon = 1e-6);
        let degenerate = sigma_subgradient(Vec2::zero(), Vec2::new(1.0, 0.0), 1.0, 6.0, true);
        assert!(degenerate.degenerate);
        assert_eq!(degenerate.representative(), Vec2::zero());
    }

    #[test]
    fn kernels_instantiate_in_single_precision() {
        let d = Disk::<f32>::new(Vec2::new(0.0, 0.0), 3.0).unwrap();
        assert_eq!(project_to_disk(&d, Vec2::new(6.0, 0.0)), Vec2::new(3.0, 0.0));
        let m = contact_jacobian(Vec2::<f32>::new(0.0, 6.0), Vec2::zero()).unwrap();
        assert!((m.m[0][0] - 1.0 / 6.0).abs() < 1e-7);
    }
}
