//! Artifact formats.
//!
//! `trajectory.csv` has one row per grid node with columns
//!
//! ```text
//! t, y{i}_1, y{i}_2 (all i), x{i}_1, x{i}_2 (all i), u{i}_{j} (all i, j),
//! v{i}_{j} (all i, j), boundary{i} (all i), touching{i} (all i)
//! ```
//!
//! Participants are numbered from 1. Controls are piecewise constant, so the
//! row of node `k` holds the value on `[t_k, t_{k+1})` and the last row
//! repeats the final cell. `boundary{i}` flags population contact with the
//! disk boundary, `touching{i}` contact of disk `i` with another disk.
//!
//! `controls.csv` has one row per cell with columns `t, v{i}_{j}, u{i}_{j}`
//! and is the format read by `--controls`.
//!
//! Numbers are written with 12 significant digits, except in `controls.csv`
//! which keeps the shortest exact representation so that re-reading it
//! reproduces the simulated controls bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use crowdsweep::dynamics::{ControlProfile, TimeGrid, Trajectory};
use serde_json::Value;

use crate::CliError;

/// Rounds to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// JSON number rounded to 12 significant digits; non-finite values become
/// the strings `"inf"`, `"-inf"` and `"nan"`.
pub fn num(x: f64) -> Value {
    match serde_json::Number::from_f64(sig12(x)) {
        Some(n) => Value::Number(n),
        None if x.is_nan() => Value::String("nan".into()),
        None if x > 0.0 => Value::String("inf".into()),
        None => Value::String("-inf".into()),
    }
}

fn text12(x: f64) -> String {
    format!("{:?}", sig12(x))
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error, what: &Path| CliError::Io(format!("{}: {e}", what.display()));
    fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| io(e, &tmp))?;
        f.write_all(bytes).map_err(|e| io(e, &tmp))?;
        f.sync_all().map_err(|e| io(e, &tmp))?;
    }
    fs::rename(&tmp, &target).map_err(|e| io(e, &target))
}

fn csv_bytes(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(&header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

pub fn trajectory_csv(
    y: &Trajectory<f64>,
    x: &Trajectory<f64>,
    u: &ControlProfile<f64>,
    v: &ControlProfile<f64>,
) -> Result<Vec<u8>, CliError> {
    let n = y.n;
    let grid = y.grid;
    let mut header = vec!["t".to_string()];
    for (tag, _) in [("y", 0), ("x", 1)] {
        for i in 1..=n {
            header.push(format!("{tag}{i}_1"));
            header.push(format!("{tag}{i}_2"));
        }
    }
    for (tag, p) in [("u", u), ("v", v)] {
        for i in 0..n {
            for j in 1..=p.dims[i] {
                header.push(format!("{tag}{}_{j}", i + 1));
            }
        }
    }
    for tag in ["boundary", "touching"] {
        for i in 1..=n {
            header.push(format!("{tag}{i}"));
        }
    }
    let rows = (0..grid.nodes()).map(|k| {
        let cell = k.min(grid.cells - 1);
        let mut r = vec![text12(grid.t(k))];
        for traj in [y, x] {
            for i in 0..n {
                let p = traj.at(k, i);
                r.push(text12(p.x));
                r.push(text12(p.y));
            }
        }
        for p in [u, v] {
            for i in 0..n {
                r.extend(p.get(i, cell).iter().map(|&c| text12(c)));
            }
        }
        for traj in [x, y] {
            for i in 0..n {
                r.push(if traj.in_contact(k, i) { "1" } else { "0" }.to_string());
            }
        }
        r
    });
    csv_bytes(header, rows)
}

fn control_header(v_dims: &[usize], u_dims: &[usize]) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for (tag, dims) in [("v", v_dims), ("u", u_dims)] {
        for (i, &m) in dims.iter().enumerate() {
            for j in 1..=m {
                header.push(format!("{tag}{}_{j}", i + 1));
            }
        }
    }
    header
}

pub fn controls_csv(v: &ControlProfile<f64>, u: &ControlProfile<f64>) -> Result<Vec<u8>, CliError> {
    let grid = v.grid;
    let rows = (0..grid.cells).map(|k| {
        let mut r = vec![format!("{:?}", grid.t(k))];
        for p in [v, u] {
            for i in 0..p.n() {
                r.extend(p.get(i, k).iter().map(|c| format!("{c:?}")));
            }
        }
        r
    });
    csv_bytes(control_header(&v.dims, &u.dims), rows)
}

/// Reads a controls file written by [`controls_csv`]; the header must match
/// the scenario's control dimensions and the row count the grid.
pub fn read_controls(
    path: &Path,
    grid: TimeGrid<f64>,
    v_dims: &[usize],
    u_dims: &[usize],
) -> Result<(ControlProfile<f64>, ControlProfile<f64>), CliError> {
    let bad = |m: String| CliError::Parse(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let expected = control_header(v_dims, u_dims);
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(bad(format!("expected columns {}, found {}", expected.join(","), header.join(","))));
    }
    let mut v = ControlProfile::zeros(grid, v_dims);
    let mut u = ControlProfile::zeros(grid, u_dims);
    let mut rows = 0;
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if k >= grid.cells {
            return Err(bad(format!("more than {} rows for a grid of {} cells", grid.cells, grid.cells)));
        }
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("row {}: {e}", k + 2))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut at = 1;
        for (p, dims) in [(&mut v, v_dims), (&mut u, u_dims)] {
            for (i, &m) in dims.iter().enumerate() {
                p.set(i, k, &vals[at..at + m]);
                at += m;
            }
        }
        rows += 1;
    }
    if rows != grid.cells {
        return Err(bad(format!("{rows} rows for a grid of {} cells", grid.cells)));
    }
    Ok((v, u))
}
