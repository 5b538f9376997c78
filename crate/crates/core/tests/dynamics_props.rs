use crowdsweep::bilevel::{closed_form_controls, solve_twodisk_parametric};
use crowdsweep::dynamics::*;
use crowdsweep::{Mat2d, Vec2d};
use proptest::prelude::*;

fn mover(y0: Vec2d, cap: f64) -> Participant<f64> {
    Participant {
        y0,
        x0: InitialState::Fixed(y0),
        drift: DriftSpec::Affine { a: Mat2d::zero(), b_cols: vec![Vec2d::new(1.0, 0.0), Vec2d::new(0.0, 1.0)], offset: Vec2d::zero() },
        u_set: ControlSetSpec::Interval { lo: vec![-4.0, -4.0], hi: vec![4.0, 4.0] },
        v_set: ControlSetSpec::Ball { dim: 2, radius: 5.0 },
        cap,
        rho: 1.0,
    }
}

fn profile(grid: TimeGrid<f64>, dims: &[usize], vals: &[f64]) -> ControlProfile<f64> {
    let mut idx = 0;
    ControlProfile::from_fn(grid, dims, |_, _| {
        let m = 2;
        let out = (0..m).map(|j| vals[(idx + j) % vals.len()]).collect();
        idx += m;
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn catchup_keeps_populations_confined(
        v in prop::collection::vec(-3.5f64..3.5, 4),
        u in prop::collection::vec(-4.0f64..4.0, 8..40),
        cells in 10usize..80,
    ) {
        let s = Scenario::new(1.0, 2.0, vec![mover(Vec2d::new(0.0, 0.0), 1e6), mover(Vec2d::new(10.0, 0.0), 1e6)]).unwrap();
        let grid = TimeGrid::new(2.0, cells).unwrap();
        let vp = profile(grid, &[2, 2], &v);
        let up = profile(grid, &[2, 2], &u);
        let y = integrate_upper(&s, &vp).unwrap();
        let x = integrate_lower_catchup(&s, &y, &up, &s.default_x0()).unwrap();
        for k in 0..grid.nodes() {
            for i in 0..2 {
                prop_assert!((x.at(k, i) - y.at(k, i)).norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn common_translation_preserves_center_distance(vx in -3.0f64..3.0, vy in -3.0f64..3.0, cells in 5usize..200) {
        let s = Scenario::new(1.0, 2.0, vec![mover(Vec2d::new(0.0, 0.0), 10.0), mover(Vec2d::new(2.0, 0.0), 10.0)]).unwrap();
        let grid = TimeGrid::new(2.0, cells).unwrap();
        let vp = ControlProfile::from_fn(grid, &[2, 2], |_, _| vec![vx, vy]);
        let y = integrate_upper(&s, &vp).unwrap();
        for k in 0..grid.nodes() {
            prop_assert!(((y.at(k, 0) - y.at(k, 1)).norm() - 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn costs_are_rotation_invariant(angle in 0.0f64..std::f64::consts::TAU) {
        let s = twodisk_scenario::<f64>();
        let grid = TimeGrid::new(6.0, 600).unwrap();
        let (params, _) = solve_twodisk_parametric(&s, grid).unwrap();
        let (v, u) = closed_form_controls(&s, &params, grid).unwrap();
        let r = s.rotated(angle);
        let vr = ControlProfile::from_fn(grid, &[2, 2], |i, k| {
            let w = v.vec2(i, k).rotated(angle);
            vec![w.x, w.y]
        });
        let y = integrate_upper(&s, &v).unwrap();
        let yr = integrate_upper(&r, &vr).unwrap();
        let x = integrate_lower_catchup(&s, &y, &u, &s.default_x0()).unwrap();
        let xr = integrate_lower_catchup(&r, &yr, &u, &r.default_x0()).unwrap();
        prop_assert!((cost_upper(&y.terminal()) - cost_upper(&yr.terminal())).abs() <= 1e-9);
        for i in 0..2 {
            prop_assert!((x.terminal()[i].rotated(angle) - xr.terminal()[i]).norm() <= 1e-8);
        }
        prop_assert_eq!(cost_lower_all(&u), cost_lower_all(&u.clone()));
    }
}

#[test]
fn cost_functionals_on_simple_profiles() {
    let grid = TimeGrid::new(2.0, 4).unwrap();
    let u: ControlProfile<f64> = ControlProfile::from_fn(grid, &[1], |_, k| vec![if k < 2 { 1.0 } else { 0.5 }]);
    // h Σ u² = 0.5 (1 + 1 + 0.25 + 0.25)
    assert!((cost_lower(&u, 0) - 1.25).abs() < 1e-15);
    assert_eq!(cost_upper(&[Vec2d::new(3.0, 4.0), Vec2d::new(0.0, 1.0)]), 13.0);
}

#[test]
fn exceeding_the_cap_is_an_error() {
    let s = Scenario::new(1.0, 1.0, vec![mover(Vec2d::zero(), 0.5)]).unwrap();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let v = ControlProfile::from_fn(grid, &[2], |_, _| vec![3.0, 0.0]);
    let u = ControlProfile::zeros(grid, &[2]);
    let y = integrate_upper(&s, &v).unwrap();
    let err = integrate_lower_catchup(&s, &y, &u, &s.default_x0()).unwrap_err();
    assert!(matches!(err, DynamicsError::TruncationViolation { participant: 0, .. }));
}

#[test]
fn out_of_set_controls_are_rejected() {
    let s = Scenario::new(1.0, 1.0, vec![mover(Vec2d::zero(), 5.0)]).unwrap();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let v = ControlProfile::from_fn(grid, &[2], |_, _| vec![6.0, 0.0]);
    assert!(matches!(integrate_upper(&s, &v), Err(DynamicsError::InfeasibleControl { .. })));
}

#[test]
fn overlapping_start_is_rejected() {
    let err = Scenario::new(1.0, 1.0, vec![mover(Vec2d::zero(), 5.0), mover(Vec2d::new(1.0, 0.0), 5.0)]).unwrap_err();
    assert!(matches!(err, DynamicsError::InvalidScenario { invariant: "non-overlap", .. }));
}

#[test]
fn twodisk_cap_bracket() {
    let s = twodisk_scenario::<f64>();
    let grid = TimeGrid::new(6.0, 2400).unwrap();
    let (_, sol) = solve_twodisk_parametric(&s, grid).unwrap();
    let samples = contact_samples(&sol.y, &sol.x);
    let b = h5_bounds(&s, &samples).unwrap();
    let lead = b[1].unwrap();
    assert!((lead.upper - 10.0 * 2f64.sqrt()).abs() < 1e-6, "upper {}", lead.upper);
    assert!(lead.brackets(6.0));
}

#[test]
fn single_precision_instantiation() {
    let s = twodisk_scenario::<f32>();
    let grid = TimeGrid::<f32>::new(6.0, 600).unwrap();
    let (params, sol) = solve_twodisk_parametric(&s, grid).unwrap();
    assert!((params.t_b - 5.9148).abs() < 1e-2);
    assert!((sol.j_h - 9.0).abs() < 0.05, "J_H = {}", sol.j_h);
    assert!(sol.audit.confinement.amount < 1e-3);
}

#[test]
fn penalty_scheme_tracks_catchup() {
    // The catching-up error at coarse steps exceeds the penalty error at
    // large stiffness, so both run on a fine grid.
    let s = twodisk_scenario::<f64>();
    let grid = TimeGrid::new(6.0, 12000).unwrap();
    let (params, sol) = solve_twodisk_parametric(&s, grid).unwrap();
    let (_, u) = closed_form_controls(&s, &params, grid).unwrap();
    let mut last = f64::INFINITY;
    for k in [1e2, 1e3, 1e4] {
        let xp = integrate_lower_penalty(&s, &sol.y, &u, &s.default_x0(), k, penalty_substeps(grid.h(), k)).unwrap();
        let d: f64 = (0..2).map(|i| (xp.terminal()[i] - sol.x.terminal()[i]).norm()).sum();
        assert!(d <= last * (1.0 + 1e-12), "k = {k}: {d} > {last}");
        last = d;
    }
}
