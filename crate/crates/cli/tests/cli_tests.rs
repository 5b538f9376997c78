use std::path::{Path, PathBuf};
use std::process::Command;

use crowdsweep::dynamics::{twodisk_scenario, ControlSetSpec, DriftSpec, InitialState, Participant, Scenario};
use crowdsweep::{Mat2d, Vec2d};
use crowdsweep_cli::{parse_scenario, parse_str, run, Outcome, ScenarioFile};
use proptest::prelude::*;
use serde_json::Value;

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/twodisk.scn")
}

fn cmd(args: &[&str]) -> Outcome {
    run(std::iter::once("crowdsweep").chain(args.iter().copied()))
}

fn summary(out: &Outcome) -> Value {
    serde_json::from_str(&out.stdout).unwrap_or_else(|e| panic!("bad summary ({e}): {}", out.stdout))
}

fn error_kind(out: &Outcome) -> String {
    let v: Value = serde_json::from_str(out.stderr.trim()).unwrap();
    v["error"]["kind"].as_str().unwrap().to_string()
}

/// One resting disk: zero drift, zero speed allowed.
const RESTING: &str = r#"
[meta]
name = "resting"

[problem]
N = 1
R = 2.0
T = 1.0

[[participants]]
y0 = [1.0, -1.0]
x0 = [1.5, -1.0]
drift = { family = "affine", A = [[0.0, 0.0], [0.0, 0.0]], B = [[1.0, 0.0]] }
U = { shape = "interval", lo = [-1.0], hi = [1.0] }
V = { shape = "ball", dim = 2, radius = 1.0 }
M = 2.0
rho = 1.0

[solver]
grid_K = 50
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn bundled_example_is_the_twodisk_instance() {
    let (file, s, _) = parse_scenario(&example()).unwrap();
    assert_eq!(s, twodisk_scenario::<f64>());
    assert_eq!(file.meta.name, "twodisk");
    let d = (s.participants[0].y0 - s.participants[1].y0).norm();
    assert!((d - 2.0 * s.radius).abs() < 1e-12);
}

#[test]
fn serialized_example_parses_back_identically() {
    let (file, s, _) = parse_scenario(&example()).unwrap();
    let text = file.to_toml().unwrap();
    let (file2, s2) = parse_str(&text).unwrap();
    assert_eq!(file, file2);
    assert_eq!(s, s2);
}

fn arb_set(planar: bool) -> impl Strategy<Value = ControlSetSpec<f64>> {
    let interval = (1usize..3, -5.0f64..0.0, 0.0f64..5.0).prop_map(move |(m, lo, hi)| {
        let m = if planar { 2 } else { m };
        ControlSetSpec::Interval { lo: vec![lo; m], hi: vec![hi; m] }
    });
    let segment = (0.0f64..std::f64::consts::TAU, 0.0f64..20.0).prop_map(|(a, l)| ControlSetSpec::segment(Vec2d::new(a.cos(), a.sin()), l));
    let ball = (0.0f64..10.0).prop_map(|r| ControlSetSpec::Ball { dim: 2, radius: r });
    prop_oneof![interval, segment, ball]
}

fn arb_scenario() -> impl Strategy<Value = Scenario<f64>> {
    let participant = (
        -1.0f64..1.0,
        prop::bool::ANY,
        prop::bool::ANY,
        -10.0f64..10.0,
        arb_set(false),
        arb_set(true),
        0.1f64..10.0,
        0.0f64..3.0,
    );
    (prop::collection::vec(participant, 1..4), 0.5f64..3.0, 0.1f64..10.0).prop_map(|(ps, r, t)| {
        let participants = ps
            .into_iter()
            .enumerate()
            .map(|(i, (off, free, affine, c, u_set, v_set, cap, rho))| {
                let y0 = Vec2d::new(10.0 * r * i as f64, off);
                let dim = u_set.dim();
                let drift = if affine || dim != 1 {
                    DriftSpec::Affine {
                        a: Mat2d { m: [[c, 0.5], [-0.25, 1.0]] },
                        b_cols: (0..dim).map(|j| Vec2d::new(1.0, j as f64)).collect(),
                        offset: Vec2d::new(0.1, c),
                    }
                } else {
                    DriftSpec::ScaledLinear { c }
                };
                let x0 = if free { InitialState::Free } else { InitialState::Fixed(y0 + Vec2d::new(0.5 * r, 0.0)) };
                Participant { y0, x0, drift, u_set, v_set, cap, rho }
            })
            .collect();
        Scenario::new(r, t, participants).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn scenarios_round_trip_through_text(s in arb_scenario()) {
        let text = ScenarioFile::from_scenario("generated", &s).to_toml().unwrap();
        let (_, back) = parse_str(&text).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn parse_rejections_name_the_problem() {
    let base = std::fs::read_to_string(example()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.scn", base.replace("name = \"twodisk\"", "name = \"twodisk\"\ncolour = \"red\""), "unknown field"),
        ("overlap.scn", base.replace("y0 = [-48.0, 48.0]", "y0 = [-50.0, 50.0]").replace("x0 = [-48.0, 48.0]", "x0 = [-50.0, 50.0]"), "non-overlap"),
        ("cap.scn", base.replacen("M = 6.0", "M = 0.0", 1), "cap-positive"),
        ("count.scn", base.replace("N = 2", "N = 3"), "problem.N = 3"),
        ("keyword.scn", base.replacen("x0 = [-48.0, 48.0]", "x0 = \"loose\"", 1), "expected a point"),
        ("syntax.scn", base.replace("R = 3.0", "R = "), "line"),
    ];
    for (name, text, needle) in cases {
        let p = write(dir.path(), name, &text);
        let out = cmd(&["simulate", p.to_str().unwrap()]);
        assert_eq!(out.code, 1, "{name}: {}", out.stderr);
        assert_eq!(error_kind(&out), "parse", "{name}");
        assert!(out.stderr.contains(needle), "{name}: {}", out.stderr);
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let ex = example();
    let ex = ex.to_str().unwrap();
    assert_eq!(cmd(&["--help"]).code, 0);
    assert_eq!(cmd(&["--version"]).code, 0);
    assert_eq!(cmd(&["frobnicate", ex]).code, 1);
    assert_eq!(cmd(&["simulate", "/nonexistent/file.scn"]).code, 1);
    let out = cmd(&["verify", ex]);
    assert_eq!((out.code, error_kind(&out).as_str()), (1, "usage"));
    assert_eq!(cmd(&["simulate", ex, "--h", "0.0025", "--grid-K", "100"]).code, 1);
    assert_eq!(cmd(&["simulate", ex, "--h", "0.007"]).code, 1);

    // Full speed with idle populations needs more correction than the cap allows.
    let mut rows = String::from("t,v1_1,v1_2,v2_1,v2_2,u1_1,u2_1\n");
    for k in 0..100 {
        rows += &format!("{},-10.0,10.0,-10.0,10.0,0.0,0.0\n", k as f64 * 0.06);
    }
    let fast = write(dir.path(), "fast.csv", &rows);
    let out = cmd(&["simulate", ex, "--grid-K", "100", "--controls", fast.to_str().unwrap()]);
    assert_eq!((out.code, error_kind(&out).as_str()), (2, "infeasible"));
    let out = cmd(&["verify", ex, "--grid-K", "100", "--controls", fast.to_str().unwrap()]);
    assert_eq!(out.code, 2);

    // Wrong row count or columns.
    let short = write(dir.path(), "short.csv", &rows);
    assert_eq!(cmd(&["simulate", ex, "--controls", short.to_str().unwrap()]).code, 1);
    let cols = write(dir.path(), "cols.csv", "t,v1_1\n0.0,1.0\n");
    assert_eq!(cmd(&["simulate", ex, "--grid-K", "1", "--controls", cols.to_str().unwrap()]).code, 1);

    // A cap above the bracket.
    let base = std::fs::read_to_string(example()).unwrap();
    let big = write(dir.path(), "big.scn", &base.replace("M = 6.0", "M = 20.0"));
    let out = cmd(&["h5check", big.to_str().unwrap(), "--grid-K", "600"]);
    assert_eq!(out.code, 3, "{}", out.stderr);
    assert_eq!(summary(&out)["bracketed"], Value::Bool(false));
    assert!(!out.stderr.is_empty());

    // The case study is outside the family when the cap changes, but solvable otherwise.
    assert_eq!(cmd(&["casestudy", big.to_str().unwrap()]).code, 1);
    assert_eq!(cmd(&["casestudy", ex]).code, 0);
}

#[test]
fn binary_reports_errors_on_stderr() {
    let exe = env!("CARGO_BIN_EXE_crowdsweep");
    let out = Command::new(exe).args(["simulate", "/nonexistent/file.scn"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["exit_code"], 1);
    let out = Command::new(exe).args(["casestudy", example().to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((s["closed_form"]["t_b"].as_f64().unwrap() - 5.915).abs() < 5e-3);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (ex, o) = (example(), out.to_str().unwrap().to_string());
    for args in [
        vec!["casestudy", ex.to_str().unwrap(), "--out", &o],
        vec!["simulate", ex.to_str().unwrap(), "--out", &o, "--penalty-k", "100", "--grid-K", "600"],
    ] {
        let a = cmd(&args);
        assert_eq!(a.code, 0, "{}", a.stderr);
        let first = files(&out);
        let b = cmd(&args);
        assert_eq!(a, b);
        assert_eq!(files(&out), first);
        let names: Vec<_> = first.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["controls.csv", "summary.json", "trajectory.csv"]);
        assert_eq!(std::fs::read_to_string(out.join("summary.json")).unwrap(), a.stdout);
    }
}

#[test]
fn summary_records_provenance_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "resting.scn", RESTING);
    let bytes = std::fs::read(&p).unwrap();
    let s = summary(&cmd(&["simulate", p.to_str().unwrap()]));
    assert_eq!(s["flags"]["grid_K"], 50);
    assert_eq!(s["flags"]["seed"], 0);
    assert_eq!(s["flags"]["tol"].as_f64(), Some(1e-3));
    assert_eq!(s["scenario"]["name"], "resting");
    use sha2::Digest;
    assert_eq!(s["scenario"]["sha256"].as_str().unwrap(), hex::encode(sha2::Sha256::digest(&bytes)));
    let s = summary(&cmd(&["simulate", p.to_str().unwrap(), "--grid-K", "20", "--seed", "7", "--tol", "0.01"]));
    assert_eq!(s["flags"]["grid_K"], 20);
    assert_eq!(s["flags"]["h"].as_f64(), Some(0.05));
    assert_eq!(s["flags"]["seed"], 7);
    assert_eq!(s["flags"]["tol"].as_f64(), Some(0.01));
    let s = summary(&cmd(&["simulate", p.to_str().unwrap(), "--h", "0.25"]));
    assert_eq!(s["flags"]["grid_K"], 4);
}

#[test]
fn resting_scenario_keeps_constant_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "resting.scn", RESTING);
    let out = dir.path().join("out");
    let res = cmd(&["simulate", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.code, 0, "{}", res.stderr);
    let mut r = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["t", "y1_1", "y1_2", "x1_1", "x1_2", "u1_1", "v1_1", "v1_2", "boundary1", "touching1"]);
    let rows: Vec<Vec<String>> = r.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 51);
    for col in 1..header.len() {
        assert!(rows.iter().all(|row| row[col] == rows[0][col]), "column {}", header[col]);
    }
    assert_eq!(&rows[0][1..5], ["1.0", "-1.0", "1.5", "-1.0"]);
    assert_eq!(rows[50][0], "1.0");
}

#[test]
fn controls_file_reproduces_the_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ex = example();
    let res = cmd(&["casestudy", ex.to_str().unwrap(), "--grid-K", "600", "--out", a.to_str().unwrap()]);
    assert_eq!(res.code, 0, "{}", res.stderr);
    let controls = a.join("controls.csv");
    let res = cmd(&["simulate", ex.to_str().unwrap(), "--grid-K", "600", "--controls", controls.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(res.code, 0, "{}", res.stderr);
    assert_eq!(std::fs::read(a.join("trajectory.csv")).unwrap(), std::fs::read(b.join("trajectory.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("controls.csv")).unwrap(), std::fs::read(b.join("controls.csv")).unwrap());
    let (sa, sb) = (summary(&cmd(&["casestudy", ex.to_str().unwrap(), "--grid-K", "600"])), summary(&res));
    assert_eq!(sa["run"]["J_H"], sb["run"]["J_H"]);
}

#[test]
fn numbers_carry_twelve_significant_digits() {
    use crowdsweep_cli::output::{num, sig12};
    assert_eq!(sig12(2.0 / 3.0), 0.666666666667);
    assert_eq!(sig12(-1.0e-20 / 3.0), -3.33333333333e-21);
    assert_eq!(num(f64::INFINITY), Value::String("inf".into()));
    assert_eq!(num(f64::NAN), Value::String("nan".into()));
}
