//! Report envelopes and CSV text shared by the CLI and the test suites.
//!
//! Every JSON report is `{schema_version, metadata, data}`; every CSV file
//! starts with `# key: value` lines carrying the same metadata.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::Orbit;
use crate::error::Result;
use crate::grid::GridSpec;
use crate::lattice::{CouplingParams, ThetaParams};
use crate::period_two::RegionScanReport;
use crate::phase::PhaseScanRow;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "sos-tree";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const PHASE_SCAN_HEADER: &str = "theta,theta1,root_count,roots,fprime_at_roots,transition";
pub const PERIOD2_SCAN_HEADER: &str = "theta,theta1,b,d,sign_b,sign_d,indeterminate,exact,fallback";
pub const ORBIT_HEADER: &str = "step,u,v";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithmeticMode {
    Float,
    Rational,
}

/// Model parameters as used, plus the couplings they came from if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterEcho {
    pub theta: f64,
    pub theta1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingParams>,
}

impl ParameterEcho {
    pub fn new(params: &ThetaParams, coupling: Option<CouplingParams>) -> Self {
        ParameterEcho {
            theta: params.theta(),
            theta1: params.theta1(),
            coupling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub arithmetic: ArithmeticMode,
    #[serde(default)]
    pub parameters: Option<ParameterEcho>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Tolerances, iteration limits and other knobs of the run.
    #[serde(default)]
    pub settings: BTreeMap<String, Value>,
}

impl Metadata {
    pub fn new(command: &str, arithmetic: ArithmeticMode) -> Self {
        Metadata {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            arithmetic,
            parameters: None,
            grid: None,
            settings: BTreeMap::new(),
        }
    }

    pub fn with_parameters(mut self, echo: ParameterEcho) -> Self {
        self.parameters = Some(echo);
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_setting(mut self, key: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).unwrap_or(Value::Null);
        self.settings.insert(key.to_string(), value);
        self
    }

    /// `# key: value` lines, values as compact JSON.
    pub fn comment_lines(&self) -> Result<String> {
        let mut out = String::new();
        let mut line = |key: &str, value: String| {
            let _ = writeln!(out, "# {key}: {value}");
        };
        line("schema_version", SCHEMA_VERSION.to_string());
        line("tool", format!("{} {}", self.tool, self.version));
        line("command", self.command.clone());
        line("arithmetic", serde_json::to_string(&self.arithmetic)?);
        line("parameters", serde_json::to_string(&self.parameters)?);
        line("grid", serde_json::to_string(&self.grid)?);
        line("settings", serde_json::to_string(&self.settings)?);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub data: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(metadata: Metadata, data: T) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            metadata,
            data,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn joined(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";")
}

pub fn phase_scan_csv(meta: &Metadata, rows: &[PhaseScanRow]) -> Result<String> {
    let mut out = meta.comment_lines()?;
    out.push_str(PHASE_SCAN_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.theta),
            fmt_f64(r.theta1),
            r.root_count,
            joined(&r.roots),
            joined(&r.fprime_at_roots),
            r.transition
        );
    }
    Ok(out)
}

/// Per-cell values and signs of `B` and `D`.
pub fn period2_scan_csv(meta: &Metadata, report: &RegionScanReport) -> Result<String> {
    let mut out = meta.comment_lines()?;
    out.push_str(PERIOD2_SCAN_HEADER);
    out.push('\n');
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(c.theta),
            fmt_f64(c.theta1),
            fmt_f64(c.b),
            fmt_f64(c.d),
            c.sign_b.symbol(),
            c.sign_d.symbol(),
            c.indeterminate,
            c.exact,
            c.fallback
        );
    }
    Ok(out)
}

/// Retained orbit states followed by a `# status:` line.
pub fn orbit_csv(meta: &Metadata, orbit: &Orbit) -> Result<String> {
    let mut out = meta.comment_lines()?;
    out.push_str(ORBIT_HEADER);
    out.push('\n');
    for p in orbit.states() {
        let _ = writeln!(out, "{},{},{}", p.step, fmt_f64(p.state.u()), fmt_f64(p.state.v()));
    }
    let _ = writeln!(out, "# status: {}", orbit_status_line(orbit));
    Ok(out)
}

pub fn orbit_status_line(orbit: &Orbit) -> String {
    use crate::dynamics::OrbitStatus;
    match &orbit.status {
        OrbitStatus::Converged { limit } => format!(
            "converged after {} iterations to u={} v={}",
            orbit.iterations,
            fmt_f64(limit.u()),
            fmt_f64(limit.v())
        ),
        OrbitStatus::Cycle { period, points } => {
            let pts: Vec<String> = points
                .iter()
                .map(|p| format!("({}, {})", fmt_f64(p.u()), fmt_f64(p.v())))
                .collect();
            format!(
                "cycle of period {} after {} iterations: {}",
                period,
                orbit.iterations,
                pts.join(" ")
            )
        }
        OrbitStatus::MaxIterations => format!("max_iterations reached after {} iterations", orbit.iterations),
    }
}
