//! Command implementations.

use crowdsweep::bilevel::{solve_bilevel_direct, solve_twodisk_parametric, BilevelSolution, DirectOptions, Method};
use crowdsweep::dynamics::{
    check_feasibility, contact_samples, cost_lower_all, cost_upper, h5_bounds, integrate_lower_catchup,
    integrate_lower_penalty, integrate_upper, penalty_substeps, ControlProfile, FeasibilityReport, Scenario,
    TimeGrid, Trajectory, Violation, REPORT_TOL,
};
use crowdsweep::nco::{fit_multipliers, Check, FitOptions, NcoReport, Nontriviality};
use crowdsweep::Vec2d;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::output::{controls_csv, num, read_controls, trajectory_csv, write_atomic};
use crate::scenario_file::{parse_scenario, SolverFile};
use crate::{CliError, Command, Flags, Invocation, EXIT_INFEASIBLE, EXIT_OK, EXIT_UNVERIFIED};

const DEFAULT_CELLS: usize = 2400;
const DEFAULT_TOL: f64 = 1e-3;

/// Successful run: exit code, summary text and an optional diagnostic for
/// non-zero codes.
pub(crate) struct Done {
    pub code: i32,
    pub summary: String,
    pub diagnostic: Option<CliError>,
}

/// Populations, centers, lower and upper controls to write out.
type Artifacts<'a> = (&'a Trajectory<f64>, &'a Trajectory<f64>, &'a ControlProfile<f64>, &'a ControlProfile<f64>);

type Controls = (ControlProfile<f64>, ControlProfile<f64>);

/// Flags after applying `flag > [solver] section > default`.
struct Settings {
    grid: TimeGrid<f64>,
    seed: u64,
    tol: f64,
    penalty_k: Option<f64>,
}

fn resolve(horizon: f64, flags: &Flags, solver: &SolverFile) -> Result<Settings, CliError> {
    let (h, k) = if flags.h.is_some() || flags.grid_k.is_some() {
        (flags.h, flags.grid_k)
    } else {
        (solver.h, solver.grid_k)
    };
    let grid = match (h, k) {
        (Some(h), k) => {
            let g = TimeGrid::with_step(horizon, h)?;
            if let Some(k) = k.filter(|&k| k != g.cells) {
                return Err(CliError::Usage(format!("step {h} gives {} cells, not {k}", g.cells)));
            }
            g
        }
        (None, Some(k)) => TimeGrid::new(horizon, k)?,
        (None, None) => TimeGrid::new(horizon, DEFAULT_CELLS)?,
    };
    let tol = flags.tol.or(solver.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let penalty_k = flags.penalty_k.or(solver.penalty_k);
    if let Some(k) = penalty_k.filter(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(CliError::Usage(format!("penalty stiffness must be positive, got {k}")));
    }
    Ok(Settings { grid, seed: flags.seed.or(solver.seed).unwrap_or(0), tol, penalty_k })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn point(p: Vec2d) -> Value {
    json!([num(p.x), num(p.y)])
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn violation(v: &Violation<f64>) -> Value {
    json!({
        "amount": num(v.amount),
        "time": num(v.time),
        "participant": v.participant.map(|i| i + 1),
        "other": v.other.map(|i| i + 1),
    })
}

fn audit_json(a: &FeasibilityReport<f64>) -> Value {
    json!({
        "non_overlap": violation(&a.non_overlap),
        "confinement": violation(&a.confinement),
        "u_membership": violation(&a.u_membership),
        "v_membership": violation(&a.v_membership),
        "truncation": violation(&a.truncation),
        "max_violation": num(a.max_violation()),
        "tol": num(REPORT_TOL),
        "feasible": a.is_feasible(REPORT_TOL),
    })
}

fn run_json(y: &Trajectory<f64>, x: &Trajectory<f64>, u: &ControlProfile<f64>, audit: &FeasibilityReport<f64>) -> Value {
    json!({
        "J_H": num(cost_upper(&y.terminal())),
        "J_L": nums(&cost_lower_all(u)),
        "terminal": {
            "y": y.terminal().into_iter().map(point).collect::<Vec<_>>(),
            "x": x.terminal().into_iter().map(point).collect::<Vec<_>>(),
        },
        "audit": audit_json(audit),
    })
}

fn check_json(c: &Check<f64>) -> Value {
    json!({ "residual": num(c.residual), "tol": num(c.tol), "pass": c.pass })
}

fn nontriviality_json(n: &Nontriviality<f64>) -> Value {
    json!({
        "q_H": num(n.q_h),
        "q_L": num(n.q_l),
        "total_variation": num(n.tv),
        "lambda": num(n.lambda),
        "alpha": num(n.alpha),
        "measure": num(n.measure),
        "carried_by_q_L": n.carried_by_q_l(),
        "pass": n.pass,
    })
}

pub(crate) fn report_json(r: &NcoReport<f64>) -> Value {
    let checks: Map<String, Value> = r.checks().iter().map(|(k, c)| (k.to_string(), check_json(c))).collect();
    let lower: Vec<Value> = r
        .lower
        .iter()
        .map(|l| {
            let checks: Map<String, Value> = l.checks().iter().map(|(k, c)| (k.to_string(), check_json(c))).collect();
            json!({
                "participant": l.participant + 1,
                "nontriviality": nontriviality_json(&l.nontriviality),
                "checks": checks,
                "degenerate_steps": l.degenerate_steps,
                "pass": l.pass,
            })
        })
        .collect();
    let gap = r.max_lower_gap.iter().fold(0.0f64, |a, &g| a.max(g));
    json!({
        "tol": num(r.tol),
        "nontriviality": nontriviality_json(&r.nontriviality),
        "checks": checks,
        "max_lower_gap": num(gap),
        "lower": lower,
        "degenerate_steps": r.degenerate_steps,
        "notes": r.notes,
        "worst_ratio": num(r.worst_ratio()),
        "pass": r.pass,
    })
}

struct Loaded {
    scenario: Scenario<f64>,
    settings: Settings,
    header: Map<String, Value>,
}

fn load(command: &str, inv: &Invocation) -> Result<Loaded, CliError> {
    let (file, scenario, bytes) = parse_scenario(&inv.scenario)?;
    let settings = resolve(scenario.horizon, &inv.flags, &file.solver)?;
    let controls_hash = match &inv.flags.controls {
        Some(p) => Some(sha256_hex(
            &std::fs::read(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => None,
    };
    let path_str = |p: &Option<std::path::PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let mut header = Map::new();
    header.insert("command".into(), json!(command));
    header.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    header.insert(
        "scenario".into(),
        json!({
            "name": file.meta.name,
            "path": inv.scenario.display().to_string(),
            "sha256": sha256_hex(&bytes),
            "N": scenario.n(),
            "R": num(scenario.radius),
            "T": num(scenario.horizon),
        }),
    );
    header.insert(
        "flags".into(),
        json!({
            "h": num(settings.grid.h()),
            "grid_K": settings.grid.cells,
            "seed": settings.seed,
            "tol": num(settings.tol),
            "penalty_k": settings.penalty_k.map(num),
            "out": path_str(&inv.flags.out),
            "controls": path_str(&inv.flags.controls),
            "controls_sha256": controls_hash,
        }),
    );
    Ok(Loaded { scenario, settings, header })
}

fn supplied_controls(
    inv: &Invocation,
    l: &Loaded,
) -> Result<Option<Controls>, CliError> {
    let Some(path) = &inv.flags.controls else { return Ok(None) };
    let v_dims: Vec<usize> = l.scenario.participants.iter().map(|p| p.v_set.dim()).collect();
    read_controls(path, l.settings.grid, &v_dims, &l.scenario.control_dims()).map(Some)
}

fn zero_controls(l: &Loaded) -> (ControlProfile<f64>, ControlProfile<f64>) {
    let v_dims: Vec<usize> = l.scenario.participants.iter().map(|p| p.v_set.dim()).collect();
    (ControlProfile::zeros(l.settings.grid, &v_dims), ControlProfile::zeros(l.settings.grid, &l.scenario.control_dims()))
}

fn finish(
    inv: &Invocation,
    mut summary: Map<String, Value>,
    artifacts: Option<Artifacts>,
    code: i32,
    diagnostic: Option<CliError>,
) -> Result<Done, CliError> {
    summary.insert("exit_code".into(), json!(code));
    let text = serde_json::to_string_pretty(&Value::Object(summary)).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
    if let Some(dir) = &inv.flags.out {
        if let Some((y, x, u, v)) = artifacts {
            write_atomic(dir, "trajectory.csv", &trajectory_csv(y, x, u, v)?)?;
            write_atomic(dir, "controls.csv", &controls_csv(v, u)?)?;
        }
        write_atomic(dir, "summary.json", text.as_bytes())?;
    }
    Ok(Done { code, summary: text, diagnostic })
}

fn audit_outcome(audit: &FeasibilityReport<f64>) -> (i32, Option<CliError>) {
    if audit.is_feasible(REPORT_TOL) {
        (EXIT_OK, None)
    } else {
        let msg = format!("feasibility audit failed: worst violation {:e}", audit.max_violation());
        (EXIT_INFEASIBLE, Some(CliError::Infeasible(msg)))
    }
}

fn simulate(inv: &Invocation) -> Result<Done, CliError> {
    let l = load("simulate", inv)?;
    let (v, u) = match supplied_controls(inv, &l)? {
        Some(c) => c,
        None => zero_controls(&l),
    };
    let s = &l.scenario;
    let x0 = s.default_x0();
    let y = integrate_upper(s, &v)?;
    let mut summary = l.header.clone();
    let x = match l.settings.penalty_k {
        Some(k) => {
            let sub = penalty_substeps(l.settings.grid.h(), k);
            summary.insert("integrator".into(), json!({ "kind": "penalty", "stiffness": num(k), "substeps": sub }));
            integrate_lower_penalty(s, &y, &u, &x0, k, sub)?
        }
        None => {
            summary.insert("integrator".into(), json!({ "kind": "catchup" }));
            integrate_lower_catchup(s, &y, &u, &x0)?
        }
    };
    let audit = check_feasibility(s, &y, &x, &u, &v)?;
    summary.insert("run".into(), run_json(&y, &x, &u, &audit));
    let (code, diag) = audit_outcome(&audit);
    finish(inv, summary, Some((&y, &x, &u, &v)), code, diag)
}

fn solution_summary(mut summary: Map<String, Value>, sol: &BilevelSolution<f64>) -> Map<String, Value> {
    let mut run = run_json(&sol.y, &sol.x, &sol.u, &sol.audit);
    run["method"] = json!(sol.method.as_str());
    run["penalized"] = sol.penalized.map_or(Value::Null, num);
    summary.insert("run".into(), run);
    summary
}

fn solve(inv: &Invocation) -> Result<Done, CliError> {
    let l = load("solve", inv)?;
    let opts = DirectOptions { fine_cells: l.settings.grid.cells, seed: l.settings.seed, ..DirectOptions::default() };
    let sol = solve_bilevel_direct(&l.scenario, &opts)?;
    let mut summary = solution_summary(l.header.clone(), &sol);
    summary.insert("coarse_cells".into(), json!(opts.coarse_cells));
    let (code, diag) = audit_outcome(&sol.audit);
    finish(inv, summary, Some((&sol.y, &sol.x, &sol.u, &sol.v)), code, diag)
}

fn casestudy(inv: &Invocation) -> Result<Done, CliError> {
    let l = load("casestudy", inv)?;
    let (params, sol) = solve_twodisk_parametric(&l.scenario, l.settings.grid)?;
    let mut summary = solution_summary(l.header.clone(), &sol);
    let horizon = l.scenario.horizon;
    summary.insert(
        "closed_form".into(),
        json!({
            "t_a": num(params.t_a),
            "t_b": num(params.t_b),
            "v_bar": num(params.v_bar),
            "J_H": num(params.j_h()),
            "lead": params.lead + 1,
            "gamma_lead_T": num(params.gamma_lead(horizon)),
            "centers_T": params.centers(horizon).into_iter().map(point).collect::<Vec<_>>(),
        }),
    );
    let (code, diag) = audit_outcome(&sol.audit);
    finish(inv, summary, Some((&sol.y, &sol.x, &sol.u, &sol.v)), code, diag)
}

fn verify(inv: &Invocation) -> Result<Done, CliError> {
    if inv.flags.controls.is_none() {
        return Err(CliError::Usage("verify needs --controls FILE".into()));
    }
    let l = load("verify", inv)?;
    let (v, u) = supplied_controls(inv, &l)?.expect("checked above");
    let sol = BilevelSolution::assemble(&l.scenario, v, u, l.scenario.default_x0(), Method::Direct)?;
    let opts = FitOptions { tol: l.settings.tol, seed: l.settings.seed, ..FitOptions::default() };
    let fit = fit_multipliers(&l.scenario, &sol, &opts)?;
    let mut summary = solution_summary(l.header.clone(), &sol);
    summary.insert(
        "nco".into(),
        json!({
            "verified": fit.verified,
            "achieved_ratio": num(fit.achieved),
            "lambda": num(fit.upper.lambda),
            "alpha": nums(&fit.upper.alpha),
            "lower_lambda": nums(&fit.lower.witnesses.iter().map(|w| w.lambda_bar).collect::<Vec<_>>()),
            "report": report_json(&fit.report),
        }),
    );
    let (code, diag) = if fit.verified {
        (EXIT_OK, None)
    } else {
        let msg = format!("no multiplier witness within tolerance (worst ratio {:e})", fit.achieved);
        (EXIT_UNVERIFIED, Some(CliError::Internal(msg)))
    };
    finish(inv, summary, Some((&sol.y, &sol.x, &sol.u, &sol.v)), code, diag)
}

fn h5check(inv: &Invocation) -> Result<Done, CliError> {
    let l = load("h5check", inv)?;
    let s = &l.scenario;
    let (source, sol) = match supplied_controls(inv, &l)? {
        Some((v, u)) => ("controls", BilevelSolution::assemble(s, v, u, s.default_x0(), Method::Direct)?),
        None => match solve_twodisk_parametric(s, l.settings.grid) {
            Ok((_, sol)) => ("casestudy", sol),
            Err(_) => {
                let (v, u) = zero_controls(&l);
                ("zero", BilevelSolution::assemble(s, v, u, s.default_x0(), Method::Direct)?)
            }
        },
    };
    let samples = contact_samples(&sol.y, &sol.x);
    let mut summary = solution_summary(l.header.clone(), &sol);
    summary.insert("path".into(), json!(source));
    summary.insert("contact_samples".into(), json!(samples.len()));
    let (bracketed, bounds) = if samples.is_empty() {
        (false, Value::Array(Vec::new()))
    } else {
        let b = h5_bounds(s, &samples)?;
        let ok = b.iter().zip(&s.participants).all(|(b, p)| b.is_none_or(|b| b.brackets(p.cap)));
        let list = b
            .iter()
            .zip(&s.participants)
            .enumerate()
            .map(|(i, (b, p))| match b {
                Some(b) => json!({
                    "participant": i + 1,
                    "lower": num(b.lower),
                    "upper": num(b.upper),
                    "samples": b.samples,
                    "cap": num(p.cap),
                    "brackets": b.brackets(p.cap),
                }),
                None => json!({ "participant": i + 1, "samples": 0, "cap": num(p.cap) }),
            })
            .collect();
        (ok, Value::Array(list))
    };
    summary.insert("bounds".into(), bounds);
    summary.insert("bracketed".into(), json!(bracketed));
    let (code, diag) = if bracketed {
        audit_outcome(&sol.audit)
    } else {
        let msg = if samples.is_empty() { "no boundary contact along the path" } else { "cap outside the bracket" };
        (EXIT_UNVERIFIED, Some(CliError::Internal(msg.into())))
    };
    finish(inv, summary, Some((&sol.y, &sol.x, &sol.u, &sol.v)), code, diag)
}

pub(crate) fn execute(cmd: &Command) -> Result<Done, CliError> {
    match cmd {
        Command::Simulate(inv) => simulate(inv),
        Command::Solve(inv) => solve(inv),
        Command::Casestudy(inv) => casestudy(inv),
        Command::Verify(inv) => verify(inv),
        Command::H5check(inv) => h5check(inv),
    }
}

