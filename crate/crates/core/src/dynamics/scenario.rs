//! Problem instances.

use crate::dynamics::control::{ControlSetSpec, DriftSpec};
use crate::dynamics::DynamicsError;
use crate::geometry::Disk;
use crate::linalg::Vec2;
use crate::real::Real;

/// How a participant's initial population position is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState<T> {
    Fixed(Vec2<T>),
    /// Chosen by the lower-level solver inside `D + y0`.
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Participant<T> {
    /// Initial disk center.
    pub y0: Vec2<T>,
    pub x0: InitialState<T>,
    pub drift: DriftSpec<T>,
    /// Lower-level control set.
    pub u_set: ControlSetSpec<T>,
    /// Upper-level control set (planar).
    pub v_set: ControlSetSpec<T>,
    /// Truncation cap `M` of the normal cone.
    pub cap: T,
    /// Partial-calmness modulus.
    pub rho: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T> {
    pub radius: T,
    pub horizon: T,
    pub participants: Vec<Participant<T>>,
}

impl<T: Real> Scenario<T> {
    /// Builds a scenario and enforces every structural invariant.
    pub fn new(radius: T, horizon: T, participants: Vec<Participant<T>>) -> Result<Self, DynamicsError> {
        let s = Self { radius, horizon, participants };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |invariant: &'static str, detail: String| Err(DynamicsError::InvalidScenario { invariant, detail });
        if !(self.radius > T::zero()) || !self.radius.is_finite() {
            return bad("radius-positive", format!("R = {}", self.radius));
        }
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return bad("horizon-positive", format!("T = {}", self.horizon));
        }
        if self.participants.is_empty() {
            return bad("participant-count", "at least one participant is required".into());
        }
        let tol = T::lit(1e-9) * self.radius;
        for (i, p) in self.participants.iter().enumerate() {
            if !p.y0.is_finite() {
                return bad("finite-parameters", format!("participant {i}: y0 is not finite"));
            }
            if !(p.cap > T::zero()) || !p.cap.is_finite() {
                return bad("cap-positive", format!("participant {i}: M = {}", p.cap));
            }
            if !(p.rho >= T::zero()) || !p.rho.is_finite() {
                return bad("rho-nonnegative", format!("participant {i}: rho = {}", p.rho));
            }
            if let Err(e) = p.drift.validate() {
                return bad("drift-family", format!("participant {i}: {e}"));
            }
            if let Err(e) = p.u_set.validate() {
                return bad("lower-control-set", format!("participant {i}: {e}"));
            }
            if let Err(e) = p.v_set.validate() {
                return bad("upper-control-set", format!("participant {i}: {e}"));
            }
            if p.u_set.dim() != p.drift.control_dim() {
                return bad(
                    "control-dimension",
                    format!("participant {i}: drift takes {} controls, U has dimension {}", p.drift.control_dim(), p.u_set.dim()),
                );
            }
            if p.v_set.dim() != 2 {
                return bad("upper-control-dimension", format!("participant {i}: V must be planar"));
            }
            if let InitialState::Fixed(x0) = p.x0 {
                if !x0.is_finite() || (x0 - p.y0).norm() > self.radius + tol {
                    return bad(
                        "initial-confinement",
                        format!("participant {i}: |x0 - y0| = {} exceeds R = {}", (x0 - p.y0).norm(), self.radius),
                    );
                }
            }
        }
        for i in 0..self.participants.len() {
            for j in i + 1..self.participants.len() {
                let d = (self.participants[i].y0 - self.participants[j].y0).norm();
                if d < self.radius * T::lit(2.0) - tol * T::lit(2.0) {
                    return bad(
                        "non-overlap",
                        format!("participants {i} and {j}: |y0_i - y0_j| = {d} < 2R = {}", self.radius * T::lit(2.0)),
                    );
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.participants.len()
    }

    /// Centered disk `D`.
    pub fn base_disk(&self) -> Disk<T> {
        Disk { center: Vec2::zero(), radius: self.radius }
    }

    pub fn control_dims(&self) -> Vec<usize> {
        self.participants.iter().map(|p| p.drift.control_dim()).collect()
    }

    /// Initial positions with free entries replaced by the disk centers.
    pub fn default_x0(&self) -> Vec<Vec2<T>> {
        self.participants
            .iter()
            .map(|p| match p.x0 {
                InitialState::Fixed(x) => x,
                InitialState::Free => p.y0,
            })
            .collect()
    }

    /// Same scenario with every geometric datum rotated about the origin.
    pub fn rotated(&self, angle: T) -> Self {
        let mut s = self.clone();
        for p in &mut s.participants {
            p.y0 = p.y0.rotated(angle);
            if let InitialState::Fixed(x) = &mut p.x0 {
                *x = x.rotated(angle);
            }
            if let ControlSetSpec::Segment { direction, .. } = &mut p.v_set {
                *direction = direction.rotated(angle);
            }
        }
        s
    }

    pub fn cast<U: Real>(&self) -> Scenario<U> {
        Scenario {
            radius: U::lit(self.radius.to_f64_lossy()),
            horizon: U::lit(self.horizon.to_f64_lossy()),
            participants: self
                .participants
                .iter()
                .map(|p| Participant {
                    y0: p.y0.cast(),
                    x0: match p.x0 {
                        InitialState::Fixed(x) => InitialState::Fixed(x.cast()),
                        InitialState::Free => InitialState::Free,
                    },
                    drift: p.drift.cast(),
                    u_set: p.u_set.cast(),
                    v_set: p.v_set.cast(),
                    cap: U::lit(p.cap.to_f64_lossy()),
                    rho: U::lit(p.rho.to_f64_lossy()),
                })
                .collect(),
        }
    }
}

/// The two-disk evacuation instance: two contacting disks of radius 3 on the
/// diagonal through the exit, drift `−8·u·x`, `U = [0, 1]`, speed segment of
/// halflength `10√2` along the diagonal, cap 6, horizon 6, `x0 = y0`.
pub fn twodisk_scenario<T: Real>() -> Scenario<T> {
    let s2 = T::SQRT_2();
    let half = s2 / T::lit(2.0);
    let dir = Vec2::new(-half, half);
    let y2 = Vec2::new(T::lit(-48.0), T::lit(48.0));
    let y1 = Vec2::new(T::lit(-48.0) - T::lit(3.0) * s2, T::lit(48.0) + T::lit(3.0) * s2);
    let make = |y0: Vec2<T>| Participant {
        y0,
        x0: InitialState::Fixed(y0),
        drift: DriftSpec::ScaledLinear { c: T::lit(-8.0) },
        u_set: ControlSetSpec::interval(T::zero(), T::one()),
        v_set: ControlSetSpec::Segment { direction: dir, halflength: T::lit(10.0) * s2 },
        cap: T::lit(6.0),
        rho: T::one(),
    };
    Scenario { radius: T::lit(3.0), horizon: T::lit(6.0), participants: vec![make(y1), make(y2)] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twodisk_instance_is_valid_and_in_contact() {
        let s = twodisk_scenario::<f64>();
        s.validate().unwrap();
        let d = (s.participants[0].y0 - s.participants[1].y0).norm();
        assert!((d - 6.0).abs() < 1e-12);
    }

    #[test]
    fn invariants_are_named() {
        let mut s = twodisk_scenario::<f64>();
        s.participants[0].y0 = s.participants[1].y0 + Vec2::new(1.0, 0.0);
        s.participants[0].x0 = InitialState::Free;
        match s.validate() {
            Err(DynamicsError::InvalidScenario { invariant, .. }) => assert_eq!(invariant, "non-overlap"),
            other => panic!("unexpected {other:?}"),
        }
        let mut s = twodisk_scenario::<f64>();
        s.participants[1].cap = 0.0;
        assert!(matches!(s.validate(), Err(DynamicsError::InvalidScenario { invariant: "cap-positive", .. })));
        let mut s = twodisk_scenario::<f64>();
        s.participants[1].x0 = InitialState::Fixed(Vec2::new(0.0, 0.0));
        assert!(matches!(s.validate(), Err(DynamicsError::InvalidScenario { invariant: "initial-confinement", .. })));
    }
}
