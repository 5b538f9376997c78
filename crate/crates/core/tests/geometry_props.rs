use crowdsweep::geometry::*;
use crowdsweep::Vec2d;
use proptest::prelude::*;

fn point(range: f64) -> impl Strategy<Value = Vec2d> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2d::new(x, y))
}

/// Point of the circle of radius `r` at angle `a`.
fn on_circle(r: f64, a: f64) -> Vec2d {
    Vec2d::new(r * a.cos(), r * a.sin())
}

proptest! {
    #[test]
    fn projection_lands_in_disk_and_is_nonexpansive(c in point(50.0), r in 0.1f64..10.0, a in point(80.0), b in point(80.0)) {
        let d = Disk::new(c, r).unwrap();
        let pa = project_to_disk(&d, a);
        let pb = project_to_disk(&d, b);
        prop_assert!((pa - c).norm() <= r * (1.0 + 1e-12));
        prop_assert!((pa - pb).norm() <= (a - b).norm() * (1.0 + 1e-12) + 1e-12);
        // Idempotent.
        prop_assert!((project_to_disk(&d, pa) - pa).norm() <= 1e-12 * (1.0 + c.norm()));
    }

    #[test]
    fn contact_jacobian_annihilates_the_center_offset(yi in point(100.0), yj in point(100.0)) {
        prop_assume!((yi - yj).norm() > 1e-6);
        let d = contact_jacobian(yi, yj).unwrap();
        let r = d.mul_vec(yi - yj);
        prop_assert!(r.norm() <= 1e-12);
        // Symmetric and positive semidefinite with eigenvalues 0 and 1/‖y_i − y_j‖.
        prop_assert!((d.m[0][1] - d.m[1][0]).abs() <= 1e-15);
        let tr = d.m[0][0] + d.m[1][1];
        prop_assert!((tr - 1.0 / (yi - yj).norm()).abs() <= 1e-12 / (yi - yj).norm());
    }

    #[test]
    fn sigma_is_nonnegative(r in 0.5f64..5.0, a in 0.0f64..6.3, frac in 0.0f64..1.0, q in point(20.0), nu in 0.0f64..5.0, cap in 0.1f64..10.0) {
        let offset = on_circle(r * frac, a);
        prop_assert!(sigma_support(offset, q, nu, r, cap).unwrap() >= 0.0);
        let boundary = on_circle(r, a);
        prop_assert!(sigma_support(boundary, q, nu, r, cap).unwrap() >= 0.0);
    }

    #[test]
    fn truncated_cone_matches_brute_membership(r in 0.5f64..5.0, a in 0.0f64..6.3, cap in 0.5f64..8.0, xi in point(10.0)) {
        let d = Disk::new(Vec2d::zero(), r).unwrap();
        let x = on_circle(r, a);
        let cone = truncated_normal_cone(&d, x, cap).unwrap();
        let n = x * (1.0 / r);
        // Brute force: ξ = s·n with s ∈ [0, cap].
        let s = xi.dot(n);
        let brute = (xi - n * s).norm() <= 1e-9 && s >= -1e-9 && s <= cap + 1e-9;
        prop_assert_eq!(cone.contains(xi, 1e-9), brute);
    }

    #[test]
    fn sigma_gradient_matches_central_differences(r in 0.5f64..5.0, a in 0.0f64..6.3, q in point(10.0), nu in 0.0f64..3.0, cap in 0.5f64..8.0) {
        let z = on_circle(r, a);
        let switch = -(q - z * nu).dot(z * (1.0 / r));
        // Smooth points only: stay away from the kink of max(0, ·).
        prop_assume!(switch.abs() > 1e-3);
        let sub = sigma_subgradient(z, q, nu, cap, true);
        prop_assert!(!sub.is_kink());
        let fd = sigma_gradient_fd(z, q, nu, cap, 1e-6);
        let tol = 1e-5 * (1.0 + sub.representative().norm());
        prop_assert!((fd - sub.representative()).norm() <= tol, "fd {:?} vs {:?}", fd, sub.representative());
    }

    #[test]
    fn diamond_scales_each_block(a in prop::collection::vec(-5.0f64..5.0, 1..6), m in 1usize..4, seed in 0u64..1000) {
        let b: Vec<f64> = (0..a.len() * m).map(|k| ((k as u64 * 7919 + seed) % 101) as f64 - 50.0).collect();
        let got = diamond(&a, &b).unwrap();
        for (i, &s) in a.iter().enumerate() {
            for j in 0..m {
                prop_assert_eq!(got[i * m + j], s * b[i * m + j]);
            }
        }
    }
}
