//! Machine and human reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    ToleranceFailure,
    ConfigError,
    Divergence,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::ToleranceFailure => 1,
            Outcome::ConfigError => 2,
            Outcome::Divergence => 3,
        }
    }
}

/// One asserted comparison `value ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }

    /// Exact (boolean) condition, recorded as 0/1 against tolerance 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, passed: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix: f64,
    pub finished_unix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config: RunConfig,
    pub outcome: Outcome,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub data: Value,
    pub timestamps: Timestamps,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl Report {
    pub fn new(config: RunConfig, checks: Vec<Check>, data: Value, error: Option<(Outcome, String)>, started: f64) -> Self {
        let outcome = match &error {
            Some((o, _)) => *o,
            None if checks.iter().all(|c| c.passed) => Outcome::Pass,
            None => Outcome::ToleranceFailure,
        };
        Self {
            schema: "akgeom-report".into(),
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: config.command.map_or("unknown", |c| c.name()).into(),
            config,
            outcome,
            exit_code: outcome.exit_code(),
            error: error.map(|(_, e)| e),
            checks,
            data,
            timestamps: Timestamps { started_unix: started, finished_unix: now_unix() },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self, extra: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "akg {} ({})", self.command, self.tool_version);
        let _ = writeln!(s, "outcome: {:?} (exit {})", self.outcome, self.exit_code);
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        let _ = writeln!(s, "elapsed: {:.1} s", self.timestamps.finished_unix - self.timestamps.started_unix);
        if !self.checks.is_empty() {
            let _ = writeln!(s, "\nchecks:");
            for c in &self.checks {
                let _ = writeln!(
                    s,
                    "  {} {:<48} {:>11.3e} <= {:.1e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
        }
        if !extra.is_empty() {
            let _ = writeln!(s, "\n{extra}");
        }
        s
    }
}

/// Where a run writes: the run directory and the report file inside it.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub report: PathBuf,
}

impl RunPaths {
    /// A path ending in `.json` names the report file; anything else is the run directory.
    pub fn from_out(out: &Path) -> Self {
        if out.extension().is_some_and(|e| e == "json") {
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
            Self { dir, report: out.to_path_buf() }
        } else {
            Self { dir: out.to_path_buf(), report: out.join("report.json") }
        }
    }

    pub fn text(&self) -> PathBuf {
        self.report.with_extension("txt")
    }

    pub fn config(&self) -> PathBuf {
        let stem = self.report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        if stem == "report" {
            self.dir.join("config.toml")
        } else {
            self.dir.join(format!("{stem}.config.toml"))
        }
    }
}
