//! Scenario documents, built-in presets and CSV output.
//!
//! A scenario is a single strict JSON object. Agent labels in `edges` are
//! 1-based; positions and velocities are flat agent-major arrays
//! `[x1, y1, x2, y2, …]`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::diagnostics::StepDiagnostics;
use crate::dynamics::{Stacked, StackedPosition, StackedVelocity};
use crate::error::{Error, Result};
use crate::graph::{FormationGraph, GraphError};
use crate::integrators::{IntegratorKind, Variant};

pub const PAPER_TRIANGLE_H005: &str = "paper-triangle-h005";
pub const PAPER_TRIANGLE_H00005: &str = "paper-triangle-h00005";
pub const PRESETS: [&str; 2] = [PAPER_TRIANGLE_H005, PAPER_TRIANGLE_H00005];

const TRIANGLE_Q0: [f64; 6] = [5.03, -6.56, 2.02, 2.22, -2.33, 12.28];
const TRIANGLE_V0: [f64; 6] = [2.80, -2.90, 0.19, 2.07, -0.67, 1.67];

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dim: usize,
    pub agent_count: usize,
    /// `(i, j, d_ij)` with 1-based agent labels.
    pub edges: Vec<(usize, usize, f64)>,
    pub initial_positions: Vec<f64>,
    pub initial_velocities: Vec<f64>,
    pub h: f64,
    pub steps: usize,
    pub integrator: IntegratorKind,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl Scenario {
    /// Builds the formation graph, translating labels to 0-based indices.
    pub fn graph(&self) -> Result<FormationGraph> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for &(i, j, d) in &self.edges {
            let (Some(a), Some(b)) = (i.checked_sub(1), j.checked_sub(1)) else {
                return Err(Error::validation(
                    "edges",
                    format!("agent labels start at 1, got ({i}, {j})"),
                ));
            };
            edges.push((a, b, d));
        }
        FormationGraph::new(self.agent_count, edges).map_err(|e| Error::Graph(one_based(e)))
    }

    pub fn initial_state(&self) -> Result<(StackedPosition, StackedVelocity)> {
        Ok((
            Stacked::new(self.initial_positions.clone(), self.dim)?,
            Stacked::new(self.initial_velocities.clone(), self.dim)?,
        ))
    }

    /// `T = N h`.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.h
    }

    /// Checks every field and the graph; returns the graph on success.
    pub fn validate(&self) -> Result<FormationGraph> {
        if self.dim == 0 {
            return Err(Error::validation("dim", "must be at least 1"));
        }
        if self.agent_count == 0 {
            return Err(Error::validation("agent_count", "must be at least 1"));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::validation(
                "h",
                format!("must be positive, got {}", self.h),
            ));
        }
        if self.record_every == 0 {
            return Err(Error::validation("record_every", "must be at least 1"));
        }
        let expected = self.dim * self.agent_count;
        for (field, values) in [
            ("initial_positions", &self.initial_positions),
            ("initial_velocities", &self.initial_velocities),
        ] {
            if values.len() != expected {
                return Err(Error::validation(
                    field,
                    format!(
                        "expected {expected} values (dim × agent_count), found {}",
                        values.len()
                    ),
                ));
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::validation(field, format!("non-finite value {bad}")));
            }
        }
        self.graph()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

fn one_based(err: GraphError) -> GraphError {
    match err {
        GraphError::SelfLoop { agent } => GraphError::SelfLoop { agent: agent + 1 },
        GraphError::DuplicateEdge { tail, head } => GraphError::DuplicateEdge {
            tail: tail + 1,
            head: head + 1,
        },
        GraphError::IndexOutOfRange { index, agent_count } => GraphError::IndexOutOfRange {
            index: index + 1,
            agent_count,
        },
        GraphError::NonPositiveDistance {
            tail,
            head,
            distance,
        } => GraphError::NonPositiveDistance {
            tail: tail + 1,
            head: head + 1,
            distance,
        },
        GraphError::Disconnected { unreachable } => GraphError::Disconnected {
            unreachable: unreachable + 1,
        },
        GraphError::NoAgents => GraphError::NoAgents,
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Built-in scenarios: the planar three-agent triangle with all desired
/// distances 10, integrated to `T = 30`.
pub fn preset(name: &str) -> Result<Scenario> {
    let (h, steps, record_every) = match name {
        PAPER_TRIANGLE_H005 => (0.005, 6_000, 1),
        PAPER_TRIANGLE_H00005 => (0.00005, 600_000, 100),
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                available: PRESETS.to_vec(),
            })
        }
    };
    Ok(Scenario {
        dim: 2,
        agent_count: 3,
        edges: vec![(1, 2, 10.0), (2, 3, 10.0), (1, 3, 10.0)],
        initial_positions: TRIANGLE_Q0.to_vec(),
        initial_velocities: TRIANGLE_V0.to_vec(),
        h,
        steps,
        integrator: IntegratorKind::Variational,
        variant: Variant::Paper,
        record_every,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedStep {
    pub step: usize,
    pub time: f64,
    pub positions: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

/// Recorded output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub scenario: Scenario,
    /// Steps `0, r, 2r, …` for `r = record_every`.
    pub rows: Vec<RecordedStep>,
    /// Step `N`, recorded even when `N` is not a multiple of `record_every`.
    pub final_step: RecordedStep,
}

impl TrajectoryRecord {
    pub fn initial(&self) -> &RecordedStep {
        &self.rows[0]
    }

    /// `(t, Σ_i E_i^d)` for every recorded row.
    pub fn energy_series(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.time, r.diagnostics.total_discrete_energy))
            .collect()
    }
}

fn axis_name(dim: usize, a: usize) -> String {
    if dim <= 3 {
        ["x", "y", "z"][a].to_string()
    } else {
        (a + 1).to_string()
    }
}

/// Column names of the trajectory CSV.
pub fn trajectory_header(scenario: &Scenario) -> Vec<String> {
    let (s, n) = (scenario.agent_count, scenario.dim);
    let mut cols = vec!["t".to_string()];
    for i in 1..=s {
        for a in 0..n {
            cols.push(format!("q{i}_{}", axis_name(n, a)));
        }
    }
    cols.extend(energy_columns(s));
    for &(i, j, _) in &scenario.edges {
        cols.push(format!("err_{}_{}", i.min(j), i.max(j)));
    }
    cols.push("disagreement".into());
    for a in 0..n {
        cols.push(format!("p_{}", axis_name(n, a)));
    }
    cols
}

fn energy_columns(s: usize) -> Vec<String> {
    let mut cols: Vec<String> = (1..=s).map(|i| format!("Ed_{i}")).collect();
    cols.push("Ed_total".into());
    cols.push("Ed_total_over_h".into());
    cols
}

/// Column names of the energy CSV.
pub fn energy_header(scenario: &Scenario) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(energy_columns(scenario.agent_count));
    cols
}

struct Counting<W> {
    inner: W,
    bytes: usize,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

// `{:?}` on f64 prints the shortest string that parses back to the same bits.
fn push_num(line: &mut String, x: f64) {
    use std::fmt::Write as _;
    line.push(',');
    write!(line, "{x:?}").expect("writing to a String");
}

fn write_rows<W: Write>(
    sink: W,
    header: &[String],
    rows: impl Iterator<Item = String>,
) -> io::Result<usize> {
    let mut out = Counting {
        inner: io::BufWriter::new(sink),
        bytes: 0,
    };
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(out.bytes)
}

fn energy_fields(line: &mut String, d: &StepDiagnostics, h: f64) {
    for e in &d.per_agent_discrete_energy {
        push_num(line, *e);
    }
    push_num(line, d.total_discrete_energy);
    push_num(line, d.total_discrete_energy / h);
}

/// Writes header plus one row per recorded step; returns bytes written.
pub fn write_csv<W: Write>(rec: &TrajectoryRecord, sink: W) -> io::Result<usize> {
    let h = rec.scenario.h;
    let rows = rec.rows.iter().map(|r| {
        let mut line = format!("{:?}", r.time);
        for q in &r.positions {
            push_num(&mut line, *q);
        }
        let d = &r.diagnostics;
        energy_fields(&mut line, d, h);
        for e in &d.edge_errors {
            push_num(&mut line, *e);
        }
        push_num(&mut line, d.velocity_disagreement);
        for p in &d.momentum {
            push_num(&mut line, *p);
        }
        line
    });
    write_rows(sink, &trajectory_header(&rec.scenario), rows)
}

/// Time plus the energy columns only.
pub fn write_energy_csv<W: Write>(rec: &TrajectoryRecord, sink: W) -> io::Result<usize> {
    let h = rec.scenario.h;
    let rows = rec.rows.iter().map(|r| {
        let mut line = format!("{:?}", r.time);
        energy_fields(&mut line, &r.diagnostics, h);
        line
    });
    write_rows(sink, &energy_header(&rec.scenario), rows)
}
