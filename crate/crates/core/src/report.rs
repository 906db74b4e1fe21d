//! The structured report every CLI command emits, and its text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analyzer::AnalysisReport;
use crate::metrics::{CommutationGrid, EquivarianceProfile, SweepRow};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Exact,
    Approximate,
    Pass,
    Fail,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Exact | Status::Pass => 0,
            Status::Approximate | Status::Fail => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinSummary {
    pub name: String,
    pub group: String,
    pub input_size: usize,
    pub layers: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Analysis(AnalysisReport),
    Suggestion { lo: usize, hi: usize, sizes: Vec<usize> },
    Oracle(CommutationGrid),
    Profiles { profiles: Vec<EquivarianceProfile> },
    Sweep { angle_step: f64, rows: Vec<SweepRow> },
    Builtins { builtins: Vec<BuiltinSummary> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    /// The command line, minus the program name.
    pub command: Vec<String>,
    #[serde(default)]
    pub config_name: Option<String>,
    #[serde(default)]
    pub config_digest: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub status: Status,
    pub result: Payload,
}

impl ReportDocument {
    pub fn new(command: Vec<String>, status: Status, result: Payload) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config_name: None,
            config_digest: None,
            seed: None,
            status,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn render_text(&self, color: bool) -> String {
        let mark = |ok: bool| match (ok, color) {
            (true, true) => "\x1b[32m✓\x1b[0m",
            (false, true) => "\x1b[31m✗\x1b[0m",
            (true, false) => "✓",
            (false, false) => "✗",
        };
        let mut out = String::new();
        if let Some(name) = &self.config_name {
            let _ = write!(out, "{name}");
            if let Some(seed) = self.seed {
                let _ = write!(out, " (seed {seed})");
            }
            out.push('\n');
        }
        match &self.result {
            Payload::Analysis(r) => {
                let _ = writeln!(
                    out,
                    "input {}: {}",
                    r.input_size,
                    if r.exact { "exact" } else { "approximate" }
                );
                let _ = writeln!(out, "{:>3}  {:<16}{:>6}{:>8}{:>6}  ok", "#", "layer", "in", "padded", "out");
                for l in &r.trace.layers {
                    let _ = writeln!(
                        out,
                        "{:>3}  {:<16}{:>6}{:>8}{:>6}  {}{}",
                        l.layer,
                        l.kind.name(),
                        l.input,
                        l.padded,
                        l.output,
                        mark(l.condition_ok),
                        l.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default()
                    );
                }
                if !r.violations.is_empty() {
                    let _ = writeln!(out, "violations at layers {:?}", r.violations);
                }
                let _ = writeln!(
                    out,
                    "exact input sizes in [{}, {}]: {:?}",
                    r.search_window.0, r.search_window.1, r.suggested_sizes
                );
            }
            Payload::Suggestion { lo, hi, sizes } => {
                let _ = writeln!(out, "exact input sizes in [{lo}, {hi}]: {sizes:?}");
            }
            Payload::Oracle(grid) => {
                let commuting = grid.cells.iter().filter(|c| c.verdict.holds).count();
                let _ = writeln!(
                    out,
                    "{} oracle: {} cells, {} commute, {} agree with (i - k) mod s = 0 {}",
                    grid.symmetry,
                    grid.cells.len(),
                    commuting,
                    grid.agreeing,
                    mark(grid.all_agree())
                );
                if grid.cells.len() <= 32 {
                    for c in &grid.cells {
                        let _ = write!(out, "  i={:<3} k={:<2} s={:<2} holds={:<5}", c.i, c.k, c.s, c.verdict.holds);
                        if let Some(ce) = c.verdict.counterexample {
                            let _ = write!(
                                out,
                                "  at {:?}: {:?}-{:?} vs {:?}-{:?}",
                                ce.output_index,
                                ce.transform_then_sample.top_left,
                                ce.transform_then_sample.bottom_right,
                                ce.sample_then_transform.top_left,
                                ce.sample_then_transform.bottom_right
                            );
                        }
                        let _ = writeln!(out, " {}", mark(c.agrees));
                    }
                }
            }
            Payload::Profiles { profiles } => {
                for p in profiles {
                    let _ = writeln!(
                        out,
                        "seed {} ({} mode): max error {:e}",
                        p.seed,
                        if p.integer_valued { "integer" } else { "real" },
                        p.max_error()
                    );
                    let _ = writeln!(out, "{:>5}  {:<16}{:<6}{:>14}", "layer", "kind", "g", "error");
                    for e in &p.entries {
                        let _ = writeln!(
                            out,
                            "{:>5}  {:<16}{:<6}{:>14.6e}",
                            e.layer,
                            e.kind.name(),
                            e.element.name(),
                            e.error
                        );
                    }
                }
            }
            Payload::Sweep { rows, .. } => {
                let _ = writeln!(out, "{:>10}  {:>14}", "angle", "discrepancy");
                for r in rows {
                    let _ = writeln!(out, "{:>10.3}  {:>14.6e}", r.angle, r.discrepancy);
                }
            }
            Payload::Builtins { builtins } => {
                for b in builtins {
                    let _ = writeln!(
                        out,
                        "{:<14}{:<5} input {:>3}  {:>2} layers  {}",
                        b.name,
                        b.group,
                        b.input_size,
                        b.layers,
                        if b.exact { "exact" } else { "approximate" }
                    );
                }
            }
        }
        let _ = writeln!(out, "status: {}", serde_json::to_value(self.status).expect("status").as_str().unwrap_or("?"));
        out
    }
}
