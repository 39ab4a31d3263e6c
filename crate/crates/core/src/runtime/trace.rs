//! One record per master step, rendered as a line of text or JSON.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::ast::{PEnv, Program};
use crate::datalog::{Fact, Mark};
use crate::interp::SlaveRule;

use super::MasterRule;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: usize,
    pub rule: MasterRule,
    /// The slave axiom fired by an `Ehdr1` or `Eexpr` step.
    pub slave: Option<SlaveRule>,
    /// The step re-checked checkpoint goals that all held.
    pub validated: bool,
    /// Queue after the step, front first.
    pub queue: Vec<String>,
    pub mark: Mark,
    pub added: Vec<Fact>,
    pub removed: Vec<Fact>,
    pub prog: Program,
    pub env: PEnv,
    pub note: Option<String>,
}

impl TraceRecord {
    /// `Eexpr/Brk3/App3`, `Ehdr1/Tell2`, `Eman`, ...
    pub fn rule_path(&self) -> String {
        let mut s = self.rule.to_string();
        if self.validated {
            s.push_str("/Brk3");
        }
        if let Some(r) = self.slave {
            let _ = write!(s, "/{r}");
        }
        s
    }

    pub fn delta(&self) -> Vec<String> {
        self.added
            .iter()
            .map(|f| format!("+{f}"))
            .chain(self.removed.iter().map(|f| format!("-{f}")))
            .collect()
    }
}

/// How much of each record is rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum TraceLevel {
    /// Step, rule, queue and mark.
    Steps,
    /// Adds the fact delta.
    Deltas,
    /// Adds the program, parameter environment and annotations.
    #[default]
    Full,
}

impl FromStr for TraceLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "steps" => Ok(TraceLevel::Steps),
            "deltas" => Ok(TraceLevel::Deltas),
            "full" => Ok(TraceLevel::Full),
            other => Err(format!(
                "unknown trace level `{other}` (expected steps, deltas or full)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Text,
    Structured,
}

#[derive(Serialize)]
struct Line<'a> {
    step: usize,
    rule: String,
    queue: &'a [String],
    mark: Mark,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    env: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

impl<'a> Line<'a> {
    fn new(r: &'a TraceRecord, level: TraceLevel) -> Self {
        let full = level >= TraceLevel::Full;
        Line {
            step: r.step,
            rule: r.rule_path(),
            queue: &r.queue,
            mark: r.mark,
            delta: (level >= TraceLevel::Deltas).then(|| r.delta()),
            expr: full.then(|| r.prog.to_string()),
            env: (full && !r.env.is_empty()).then(|| r.env.to_string()),
            note: if full { r.note.as_deref() } else { None },
        }
    }
}

pub fn render_record(r: &TraceRecord, format: TraceFormat, level: TraceLevel) -> String {
    let line = Line::new(r, level);
    match format {
        TraceFormat::Structured => serde_json::to_string(&line).expect("trace lines serialize"),
        TraceFormat::Text => {
            let mut s = format!(
                "step={} | rule={} | queue=[{}] | mark={}",
                line.step,
                line.rule,
                line.queue.join(", "),
                line.mark
            );
            if let Some(d) = &line.delta {
                let _ = write!(s, " | delta=[{}]", d.join(", "));
            }
            if let Some(e) = &line.expr {
                let _ = write!(s, " | expr={e}");
            }
            if let Some(env) = &line.env {
                let _ = write!(s, " | env={env}");
            }
            if let Some(n) = line.note {
                let _ = write!(s, " | note={n}");
            }
            s
        }
    }
}

/// All records, one per line, each terminated by a newline.
pub fn render_trace(records: &[TraceRecord], format: TraceFormat, level: TraceLevel) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&render_record(r, format, level));
        out.push('\n');
    }
    out
}
