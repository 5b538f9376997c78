//! TOML scenario files.
//!
//! ```toml
//! [meta]
//! name = "example"
//!
//! [problem]
//! N = 1
//! R = 1.0
//! T = 2.0
//!
//! [[participants]]
//! y0 = [4.0, 0.0]
//! x0 = "free"                     # or a point, e.g. [4.0, 0.0]
//! drift = { family = "scaled_linear", c = -8.0 }
//! U = { shape = "interval", lo = [0.0], hi = [1.0] }
//! V = { shape = "segment", direction = [-1.0, 0.0], halflength = 5.0 }
//! M = 6.0
//! rho = 1.0
//!
//! [solver]                        # every key optional
//! grid_K = 2400
//! seed = 0
//! tol = 1e-3
//! ```

use std::path::Path;

use crowdsweep::dynamics::{ControlSetSpec, DriftSpec, InitialState, Participant, Scenario};
use crowdsweep::{Mat2d, Vec2d};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub meta: Meta,
    pub problem: Problem,
    pub participants: Vec<ParticipantFile>,
    #[serde(default, skip_serializing_if = "SolverFile::is_empty")]
    pub solver: SolverFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0File {
    Point([f64; 2]),
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftFile {
    ScaledLinear {
        c: f64,
    },
    Affine {
        #[serde(rename = "A")]
        a: [[f64; 2]; 2],
        /// Columns of the control matrix.
        #[serde(rename = "B")]
        b: Vec<[f64; 2]>,
        #[serde(default)]
        offset: [f64; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetFile {
    Interval { lo: Vec<f64>, hi: Vec<f64> },
    Segment { direction: [f64; 2], halflength: f64 },
    Ball { dim: usize, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantFile {
    pub y0: [f64; 2],
    pub x0: X0File,
    pub drift: DriftFile,
    #[serde(rename = "U")]
    pub u: SetFile,
    #[serde(rename = "V")]
    pub v: SetFile,
    #[serde(rename = "M")]
    pub cap: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverFile {
    #[serde(rename = "grid_K", skip_serializing_if = "Option::is_none")]
    pub grid_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty_k: Option<f64>,
}

impl SolverFile {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

fn v2(p: [f64; 2]) -> Vec2d {
    Vec2d::new(p[0], p[1])
}

fn set_spec(s: &SetFile) -> ControlSetSpec<f64> {
    match s {
        SetFile::Interval { lo, hi } => ControlSetSpec::Interval { lo: lo.clone(), hi: hi.clone() },
        SetFile::Segment { direction, halflength } => {
            ControlSetSpec::Segment { direction: v2(*direction), halflength: *halflength }
        }
        SetFile::Ball { dim, radius } => ControlSetSpec::Ball { dim: *dim, radius: *radius },
    }
}

fn set_file(s: &ControlSetSpec<f64>) -> SetFile {
    match s {
        ControlSetSpec::Interval { lo, hi } => SetFile::Interval { lo: lo.clone(), hi: hi.clone() },
        ControlSetSpec::Segment { direction, halflength } => {
            SetFile::Segment { direction: [direction.x, direction.y], halflength: *halflength }
        }
        ControlSetSpec::Ball { dim, radius } => SetFile::Ball { dim: *dim, radius: *radius },
    }
}

impl ScenarioFile {
    /// Builds and validates the scenario.
    pub fn to_scenario(&self) -> Result<Scenario<f64>, CliError> {
        if self.problem.n != self.participants.len() {
            return Err(CliError::Parse(format!(
                "problem.N = {} but {} participants are listed",
                self.problem.n,
                self.participants.len()
            )));
        }
        let mut ps = Vec::with_capacity(self.participants.len());
        for (i, p) in self.participants.iter().enumerate() {
            let x0 = match &p.x0 {
                X0File::Point(x) => InitialState::Fixed(v2(*x)),
                X0File::Keyword(k) if k == "free" => InitialState::Free,
                X0File::Keyword(k) => {
                    return Err(CliError::Parse(format!("participants[{i}].x0: expected a point or \"free\", got \"{k}\"")))
                }
            };
            let drift = match &p.drift {
                DriftFile::ScaledLinear { c } => DriftSpec::ScaledLinear { c: *c },
                DriftFile::Affine { a, b, offset } => DriftSpec::Affine {
                    a: Mat2d { m: *a },
                    b_cols: b.iter().map(|c| v2(*c)).collect(),
                    offset: v2(*offset),
                },
            };
            ps.push(Participant {
                y0: v2(p.y0),
                x0,
                drift,
                u_set: set_spec(&p.u),
                v_set: set_spec(&p.v),
                cap: p.cap,
                rho: p.rho,
            });
        }
        Ok(Scenario::new(self.problem.radius, self.problem.horizon, ps)?)
    }

    pub fn from_scenario(name: &str, s: &Scenario<f64>) -> Self {
        let participants = s
            .participants
            .iter()
            .map(|p| ParticipantFile {
                y0: [p.y0.x, p.y0.y],
                x0: match p.x0 {
                    InitialState::Fixed(x) => X0File::Point([x.x, x.y]),
                    InitialState::Free => X0File::Keyword("free".into()),
                },
                drift: match &p.drift {
                    DriftSpec::ScaledLinear { c } => DriftFile::ScaledLinear { c: *c },
                    DriftSpec::Affine { a, b_cols, offset } => DriftFile::Affine {
                        a: a.m,
                        b: b_cols.iter().map(|c| [c.x, c.y]).collect(),
                        offset: [offset.x, offset.y],
                    },
                },
                u: set_file(&p.u_set),
                v: set_file(&p.v_set),
                cap: p.cap,
                rho: p.rho,
            })
            .collect();
        Self {
            meta: Meta { name: name.to_string() },
            problem: Problem { n: s.n(), radius: s.radius, horizon: s.horizon },
            participants,
            solver: SolverFile::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }
}

pub fn parse_str(text: &str) -> Result<(ScenarioFile, Scenario<f64>), CliError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let scenario = file.to_scenario()?;
    Ok((file, scenario))
}

/// Reads, parses and validates a scenario file; also returns the raw bytes
/// for hashing.
pub fn parse_scenario(path: &Path) -> Result<(ScenarioFile, Scenario<f64>, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let (file, scenario) = parse_str(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok((file, scenario, bytes))
}
