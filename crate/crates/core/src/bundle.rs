//! Loading and cross-checking a bundle: a program (`.cml`), a context
//! (`.ctx`), handlers (`.hdl`) and a scenario (`.scn`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ast::{Expr, HandlerTable, Prim, Value};
use crate::datalog::{Context, DatalogError};
use crate::lexer::SyntaxError;
use crate::parser::{parse_handlers, parse_program, ParseError};
use crate::runtime::{parse_scenario, run, Outcome, Run, Scenario, StepCounts};
use crate::subst::{closed_check, substitute, FreeVarError};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("{place}: `{name}` is neither bound nor a declared primitive")]
    UndefinedIdentifier { place: String, name: String },
    #[error("{place}: goal variable `?{name}` is not bound by an enclosing goal")]
    UnboundGoalVariable { place: String, name: String },
    #[error("{place}: parameter `~{name}` is never bound by a dlet")]
    UnboundParameter { place: String, name: String },
    #[error("scenario injects undefined event `{0}`")]
    UndefinedEvent(String),
    #[error("primitive `{0}` declared twice")]
    DuplicatePrimitive(String),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{source}", path.display())]
    Program { path: PathBuf, source: ParseError },
    #[error("{}: {source}", path.display())]
    Context { path: PathBuf, source: DatalogError },
    #[error("{}:{source}", path.display())]
    Handlers { path: PathBuf, source: ParseError },
    #[error("{}:{source}", path.display())]
    Scenario { path: PathBuf, source: SyntaxError },
    #[error("{0}")]
    Layout(String),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Where the parts of a bundle live. Only the program is mandatory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BundlePaths {
    pub program: PathBuf,
    pub context: Option<PathBuf>,
    pub handlers: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
}

impl BundlePaths {
    /// Sorts `paths` by extension; a single directory is scanned instead.
    pub fn resolve(paths: &[PathBuf]) -> Result<Self, LoadError> {
        if let [dir] = paths {
            if dir.is_dir() {
                let entries = fs::read_dir(dir).map_err(|source| LoadError::Io {
                    path: dir.clone(),
                    source,
                })?;
                let mut files: Vec<PathBuf> = entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file())
                    .collect();
                files.sort();
                return Self::from_files(&files, true);
            }
        }
        Self::from_files(paths, false)
    }

    fn from_files(files: &[PathBuf], skip_unknown: bool) -> Result<Self, LoadError> {
        let mut program = None;
        let mut out = BundlePaths::default();
        for f in files {
            let ext = f.extension().and_then(|e| e.to_str()).unwrap_or("");
            let slot = match ext {
                "cml" => &mut program,
                "ctx" => &mut out.context,
                "hdl" => &mut out.handlers,
                "scn" => &mut out.scenario,
                _ if skip_unknown => continue,
                _ => {
                    return Err(LoadError::Layout(format!(
                        "{}: unknown file kind (expected .cml, .ctx, .hdl or .scn)",
                        f.display()
                    )))
                }
            };
            if slot.is_some() {
                return Err(LoadError::Layout(format!(
                    "more than one .{ext} file in the bundle"
                )));
            }
            *slot = Some(f.clone());
        }
        out.program =
            program.ok_or_else(|| LoadError::Layout("the bundle has no .cml program".into()))?;
        Ok(out)
    }
}

/// A linked bundle, ready to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    /// The main expression with primitives substituted in.
    pub program: Expr,
    pub ctx: Context,
    pub handlers: HandlerTable,
    pub scenario: Scenario,
    pub stubs: BTreeMap<String, Prim>,
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_bundle(paths: &BundlePaths) -> Result<Bundle, LoadError> {
    let program = read(&paths.program)?;
    let context = paths.context.as_deref().map(read).transpose()?;
    let handlers = paths.handlers.as_deref().map(read).transpose()?;
    let scenario = paths.scenario.as_deref().map(read).transpose()?;
    let named = |p: &Option<PathBuf>| p.clone().unwrap_or_default();
    link_sources(
        (&paths.program, &program),
        context.as_deref().map(|s| (named(&paths.context), s)),
        handlers.as_deref().map(|s| (named(&paths.handlers), s)),
        scenario.as_deref().map(|s| (named(&paths.scenario), s)),
    )
}

/// Builds a bundle from in-memory sources. Missing parts default to an empty
/// context, no handlers and no scenario.
pub fn load_bundle_from_sources(
    program: &str,
    context: Option<&str>,
    handlers: Option<&str>,
    scenario: Option<&str>,
) -> Result<Bundle, LoadError> {
    link_sources(
        (Path::new("program.cml"), program),
        context.map(|s| (PathBuf::from("context.ctx"), s)),
        handlers.map(|s| (PathBuf::from("handlers.hdl"), s)),
        scenario.map(|s| (PathBuf::from("scenario.scn"), s)),
    )
}

fn link_sources(
    program: (&Path, &str),
    context: Option<(PathBuf, &str)>,
    handlers: Option<(PathBuf, &str)>,
    scenario: Option<(PathBuf, &str)>,
) -> Result<Bundle, LoadError> {
    let (program_path, program_src) = program;
    let source = parse_program(program_src).map_err(|source| LoadError::Program {
        path: program_path.to_path_buf(),
        source,
    })?;
    let ctx = match context {
        Some((path, src)) => {
            Context::parse(src).map_err(|source| LoadError::Context { path, source })?
        }
        None => Context::default(),
    };
    let mut handler_table = match handlers {
        Some((path, src)) => {
            parse_handlers(src).map_err(|source| LoadError::Handlers { path, source })?
        }
        None => HandlerTable::new(),
    };
    let scenario = match scenario {
        Some((path, src)) => {
            parse_scenario(src).map_err(|source| LoadError::Scenario { path, source })?
        }
        None => Scenario::default(),
    };

    let mut stubs = BTreeMap::new();
    for ext in source.externs {
        let prim = Prim {
            name: ext.name.clone(),
            arity: ext.arity,
            result: ext.result,
            args: Vec::new(),
        };
        if stubs.insert(ext.name.clone(), prim).is_some() {
            return Err(LinkError::DuplicatePrimitive(ext.name).into());
        }
    }
    let with_stubs = |e: &Expr| {
        stubs.iter().fold(e.clone(), |e, (name, p)| {
            substitute(&e, name, &Value::Prim(p.clone()))
        })
    };

    let program = with_stubs(&source.expr);
    for (_, h) in handler_table.iter_mut() {
        *h = with_stubs(h);
    }

    let mut declared = BTreeSet::new();
    let mut collect = |e: &Expr| {
        e.walk(&mut |sub| {
            if let Expr::Dlet { param, .. } = sub {
                declared.insert(param.clone());
            }
        })
    };
    collect(&program);
    handler_table.iter().for_each(|(_, h)| collect(h));

    let check = |place: String, e: &Expr| -> Result<(), LinkError> {
        let params = closed_check(e).map_err(|err| match err {
            FreeVarError::Var(name) => LinkError::UndefinedIdentifier {
                place: place.clone(),
                name,
            },
            FreeVarError::GoalVar(name) => LinkError::UnboundGoalVariable {
                place: place.clone(),
                name,
            },
        })?;
        match params.into_iter().find(|p| !declared.contains(p)) {
            Some(name) => Err(LinkError::UnboundParameter { place, name }),
            None => Ok(()),
        }
    };
    check(program_path.display().to_string(), &program)?;
    for (event, h) in handler_table.iter() {
        check(format!("handler for `{event}`"), h)?;
    }
    if let Some(inj) = scenario
        .injections
        .iter()
        .find(|i| !scenario.events.contains_key(&i.event))
    {
        return Err(LinkError::UndefinedEvent(inj.event.clone()).into());
    }

    Ok(Bundle {
        program,
        ctx,
        handlers: handler_table,
        scenario,
        stubs,
    })
}

impl Bundle {
    pub fn run(&self, max_steps: usize) -> Run {
        run(
            self.program.clone(),
            self.ctx.clone(),
            &self.handlers,
            &self.scenario,
            max_steps,
        )
    }
}

/// Summary printed after a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub outcome: Outcome,
    pub stopped_at: usize,
    pub counts: StepCounts,
    pub trace: Option<PathBuf>,
}

impl RunReport {
    pub fn new(run: &Run, trace: Option<PathBuf>) -> Self {
        RunReport {
            outcome: run.outcome.clone(),
            stopped_at: run.step,
            counts: run.counts(),
            trace,
        }
    }

    /// 0 value, 2 adaptation failure, 3 stuck, 4 budget exhausted.
    pub fn exit_code(&self) -> i32 {
        outcome_exit_code(&self.outcome)
    }
}

pub fn outcome_exit_code(outcome: &Outcome) -> i32 {
    match outcome {
        Outcome::Value(_) => 0,
        Outcome::AdaptationFailure(_) => 2,
        Outcome::Stuck(_) => 3,
        Outcome::BudgetExceeded(_) => 4,
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "outcome: {}", self.outcome.kind())?;
        match &self.outcome {
            Outcome::Value(v) => writeln!(f, "value: {v}")?,
            other => writeln!(f, "detail: {other} (master step {})", self.stopped_at)?,
        }
        let c = &self.counts;
        writeln!(
            f,
            "steps: master={} application={} handler={} events={}",
            c.master, c.application, c.handler, c.events
        )?;
        if let Some(p) = &self.trace {
            writeln!(f, "trace: {}", p.display())?;
        }
        Ok(())
    }
}
