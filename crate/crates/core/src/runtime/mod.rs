//! The master transition system: event queue, atomic handlers and the
//! deterministic scheduler.
//!
//! Each master step applies exactly one rule, chosen by fixed priority:
//! a suspended handler runs first (`Ehdr1`, or `Ehdr2` once it is a value),
//! then a queued event is dequeued (`Eman`), and only with an empty queue
//! does the application advance (`Eexpr`). Arriving events are queued by
//! `Enew` steps, which the scheduler takes before any other rule.

mod scenario;
mod trace;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

pub use scenario::{
    parse_scenario, ChannelSource, Effect, EventDef, EventSource, Injection, Scenario,
    ScheduledSource,
};
pub use trace::{render_record, render_trace, TraceFormat, TraceLevel, TraceRecord};

use crate::ast::{Expr, HandlerTable, PEnv, Program, Value};
use crate::datalog::{retract_fact, tell_fact, Context, Mark};
use crate::interp::{
    step_slave_with, AdaptationFailure, MarkPolicy, Reduction, SlaveConfig, StepOutcome, Stuck,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MasterRule {
    Enew,
    Eman,
    Ehdr1,
    Ehdr2,
    Eexpr,
}

impl fmt::Display for MasterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// `⟨q, ρ, C, p⟩`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterConfig {
    pub queue: VecDeque<String>,
    pub env: PEnv,
    pub ctx: Context,
    pub prog: Program,
}

impl MasterConfig {
    /// Empty queue and environment, plain program.
    pub fn new(ctx: Context, expr: Expr) -> Self {
        MasterConfig {
            queue: VecDeque::new(),
            env: PEnv::new(),
            ctx,
            prog: Program::Plain(expr),
        }
    }

    /// The final value, when the program is a plain value and nothing is queued.
    pub fn idle_value(&self) -> Option<&Value> {
        match &self.prog {
            Program::Plain(e) if self.queue.is_empty() => e.as_value(),
            _ => None,
        }
    }
}

/// `C --α--> C'`: applies the effects in order and sets the event mark.
pub fn apply_event(ctx: &Context, def: &EventDef) -> Context {
    let ctx = def.effects.iter().fold(ctx.clone(), |c, eff| match eff {
        Effect::Tell(f) => tell_fact(&c, f.clone()),
        Effect::Retract(f) => retract_fact(&c, f),
    });
    ctx.with_mark(Mark::Ev)
}

/// `Enew`: appends `event` to the queue and changes nothing else.
pub fn enqueue(cfg: &MasterConfig, event: &str) -> MasterConfig {
    let mut next = cfg.clone();
    next.queue.push_back(event.to_string());
    next
}

/// Result of [`step_master`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)] // `Next` is the common case
pub enum MasterStep {
    Next {
        cfg: MasterConfig,
        rule: MasterRule,
        /// The slave step taken by `Ehdr1` and `Eexpr`.
        reduction: Option<Reduction>,
    },
    /// Plain value and empty queue: no rule but `Enew` applies.
    Idle(Value),
    Failed(AdaptationFailure),
    Stuck(Stuck),
}

/// Applies one of `Eman`, `Ehdr1`, `Ehdr2`, `Eexpr` by priority.
pub fn step_master(
    cfg: &MasterConfig,
    handlers: &HandlerTable,
    events: &BTreeMap<String, EventDef>,
) -> MasterStep {
    let slave = |expr: &Expr, policy| {
        let sc = SlaveConfig::new(cfg.env.clone(), cfg.ctx.clone(), expr.clone());
        step_slave_with(&sc, policy)
    };
    match &cfg.prog {
        Program::Suspended { handler, app } => {
            if handler.is_value() {
                return MasterStep::Next {
                    cfg: MasterConfig {
                        prog: Program::Plain(app.clone()),
                        ..cfg.clone()
                    },
                    rule: MasterRule::Ehdr2,
                    reduction: None,
                };
            }
            match slave(handler, MarkPolicy::CheckpointsOnly) {
                StepOutcome::Next(sc, reduction) => MasterStep::Next {
                    cfg: MasterConfig {
                        queue: cfg.queue.clone(),
                        env: sc.env,
                        ctx: sc.ctx,
                        prog: Program::Suspended {
                            handler: sc.expr,
                            app: app.clone(),
                        },
                    },
                    rule: MasterRule::Ehdr1,
                    reduction: Some(reduction),
                },
                StepOutcome::Done(_) => unreachable!("handler values are handled by Ehdr2"),
                StepOutcome::Failed(f) => MasterStep::Failed(f),
                StepOutcome::Stuck(s) => MasterStep::Stuck(s),
            }
        }
        Program::Plain(app) => {
            if let Some(front) = cfg.queue.front() {
                let mut queue = cfg.queue.clone();
                queue.pop_front();
                let ctx = match events.get(front) {
                    Some(def) => apply_event(&cfg.ctx, def),
                    None => apply_event(&cfg.ctx, &EventDef::new(front.clone(), Vec::new())),
                };
                return MasterStep::Next {
                    cfg: MasterConfig {
                        queue,
                        env: cfg.env.clone(),
                        ctx,
                        prog: Program::Suspended {
                            handler: handlers.get(front),
                            app: app.clone(),
                        },
                    },
                    rule: MasterRule::Eman,
                    reduction: None,
                };
            }
            match slave(app, MarkPolicy::Discharge) {
                StepOutcome::Next(sc, reduction) => MasterStep::Next {
                    cfg: MasterConfig {
                        queue: cfg.queue.clone(),
                        env: sc.env,
                        ctx: sc.ctx,
                        prog: Program::Plain(sc.expr),
                    },
                    rule: MasterRule::Eexpr,
                    reduction: Some(reduction),
                },
                StepOutcome::Done(v) => MasterStep::Idle(v),
                StepOutcome::Failed(f) => MasterStep::Failed(f),
                StepOutcome::Stuck(s) => MasterStep::Stuck(s),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Value(Value),
    AdaptationFailure(AdaptationFailure),
    Stuck(Stuck),
    /// The step budget ran out.
    BudgetExceeded(usize),
}

impl Outcome {
    pub fn kind(&self) -> &'static str {
        match self {
            Outcome::Value(_) => "value",
            Outcome::AdaptationFailure(_) => "adaptation-failure",
            Outcome::Stuck(_) => "stuck",
            Outcome::BudgetExceeded(_) => "budget-exceeded",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "value {v}"),
            Outcome::AdaptationFailure(a) => write!(f, "{a} (at `{}`)", a.redex),
            Outcome::Stuck(s) => write!(f, "stuck: {s}"),
            Outcome::BudgetExceeded(n) => write!(f, "step budget of {n} exhausted"),
        }
    }
}

/// Number of trace records of each kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepCounts {
    pub master: usize,
    /// `Eexpr` steps.
    pub application: usize,
    /// `Ehdr1` steps.
    pub handler: usize,
    pub events: usize,
}

impl StepCounts {
    pub fn of(trace: &[TraceRecord]) -> Self {
        let count = |r: MasterRule| trace.iter().filter(|t| t.rule == r).count();
        StepCounts {
            master: trace.len(),
            application: count(MasterRule::Eexpr),
            handler: count(MasterRule::Ehdr1),
            events: count(MasterRule::Enew),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub outcome: Outcome,
    /// Master-step index at which the run stopped.
    pub step: usize,
    pub trace: Vec<TraceRecord>,
    pub last: MasterConfig,
}

impl Run {
    pub fn counts(&self) -> StepCounts {
        StepCounts::of(&self.trace)
    }
}

fn record(
    step: usize,
    before: &MasterConfig,
    after: &MasterConfig,
    rule: MasterRule,
    red: Option<&Reduction>,
    note: Option<String>,
) -> TraceRecord {
    let note = note.or_else(|| {
        let red = red?;
        if let Some(ann) = &red.restored {
            Some(format!("restore: <- {} no longer holds", ann.goal))
        } else {
            red.dispatch.as_ref().map(|(i, g)| {
                if g.is_empty() {
                    format!("dispatch case {i}")
                } else {
                    format!("dispatch case {i} on <- {g}")
                }
            })
        }
    });
    TraceRecord {
        step,
        rule,
        slave: red.map(|r| r.rule),
        validated: red.is_some_and(|r| r.validated),
        queue: after.queue.iter().cloned().collect(),
        mark: after.ctx.mark(),
        added: after.ctx.facts_not_in(&before.ctx).cloned().collect(),
        removed: before.ctx.facts_not_in(&after.ctx).cloned().collect(),
        prog: after.prog.clone(),
        env: after.env.clone(),
        note,
    }
}

/// Runs `cfg` to completion, taking events from `source`. Every master step,
/// `Enew` included, consumes one index of the `max_steps` budget.
pub fn run_with_source(
    cfg: MasterConfig,
    handlers: &HandlerTable,
    events: &BTreeMap<String, EventDef>,
    source: &mut dyn EventSource,
    max_steps: usize,
) -> Run {
    let mut cfg = cfg;
    let mut trace = Vec::new();
    let mut arrived = VecDeque::<String>::new();
    loop {
        let step = trace.len();
        let idle = cfg.idle_value().is_some() && arrived.is_empty();
        arrived.extend(source.poll(step, idle));
        let finish = |outcome, cfg, trace| Run {
            outcome,
            step,
            trace,
            last: cfg,
        };
        if let Some(v) = cfg.idle_value() {
            if arrived.is_empty() && source.exhausted() {
                return finish(Outcome::Value(v.clone()), cfg, trace);
            }
        }
        if step >= max_steps {
            return finish(Outcome::BudgetExceeded(max_steps), cfg, trace);
        }
        if let Some(event) = arrived.pop_front() {
            let next = enqueue(&cfg, &event);
            trace.push(record(
                step,
                &cfg,
                &next,
                MasterRule::Enew,
                None,
                Some(format!("arrive {event}")),
            ));
            cfg = next;
            continue;
        }
        match step_master(&cfg, handlers, events) {
            MasterStep::Next {
                cfg: next,
                rule,
                reduction,
            } => {
                let note = match rule {
                    MasterRule::Eman => cfg.queue.front().map(|e| format!("handle {e}")),
                    MasterRule::Ehdr2 => Some("resume".to_string()),
                    _ => None,
                };
                trace.push(record(step, &cfg, &next, rule, reduction.as_ref(), note));
                cfg = next;
            }
            // Only reachable when an idle program's source has nothing to
            // deliver even though it is not exhausted.
            MasterStep::Idle(v) => return finish(Outcome::Value(v), cfg, trace),
            MasterStep::Failed(f) => return finish(Outcome::AdaptationFailure(f), cfg, trace),
            MasterStep::Stuck(s) => return finish(Outcome::Stuck(s), cfg, trace),
        }
    }
}

/// Runs `program` under `scenario`'s injection schedule.
pub fn run(
    program: Expr,
    ctx: Context,
    handlers: &HandlerTable,
    scenario: &Scenario,
    max_steps: usize,
) -> Run {
    let mut source = scenario.source();
    run_with_source(
        MasterConfig::new(ctx, program),
        handlers,
        &scenario.events,
        &mut source,
        max_steps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalog::Fact;
    use crate::parser::{parse_expr, parse_handlers};

    fn rules(run: &Run) -> Vec<String> {
        run.trace.iter().map(TraceRecord::rule_path).collect()
    }

    #[test]
    fn apply_event_examples() {
        let on = Fact::prop("phone_on");
        let lost = EventDef::new("signalLost", vec![Effect::Retract(on.clone())]);
        let c = apply_event(&Context::from_facts([on.clone()]), &lost);
        assert_eq!((c.facts().len(), c.mark()), (0, Mark::Ev));
        let c = apply_event(
            &Context::from_facts([on.clone()]),
            &EventDef::new("e", vec![]),
        );
        assert!(c.contains(&on) && c.mark() == Mark::Ev);
        let a = Fact::prop("a");
        let def = EventDef::new("e", vec![Effect::Tell(a.clone()), Effect::Retract(a)]);
        let c = apply_event(&Context::default(), &def);
        assert_eq!((c.facts().len(), c.mark()), (0, Mark::Ev));
    }

    #[test]
    fn enqueue_is_fifo_and_touches_only_the_queue() {
        let cfg = MasterConfig {
            prog: Program::Suspended {
                handler: Expr::int(1),
                app: Expr::int(2),
            },
            ..MasterConfig::new(Context::from_facts([Fact::prop("a")]), Expr::unit())
        };
        let next = enqueue(&enqueue(&cfg, "x"), "y");
        assert_eq!(next.queue, ["x", "y"]);
        assert_eq!(
            MasterConfig {
                queue: VecDeque::new(),
                ..next
            },
            cfg
        );
    }

    #[test]
    fn unhandled_event_still_changes_context() {
        let mut events = BTreeMap::new();
        events.insert(
            "e".to_string(),
            EventDef::new("e", vec![Effect::Tell(Fact::prop("a"))]),
        );
        let cfg = enqueue(
            &MasterConfig::new(Context::default(), parse_expr("1").unwrap()),
            "e",
        );
        let h = HandlerTable::new();
        let MasterStep::Next { cfg, rule, .. } = step_master(&cfg, &h, &events) else {
            panic!()
        };
        assert_eq!(rule, MasterRule::Eman);
        assert!(cfg.ctx.contains(&Fact::prop("a")) && cfg.ctx.mark() == Mark::Ev);
        assert_eq!(
            cfg.prog,
            Program::Suspended {
                handler: Expr::unit(),
                app: Expr::int(1)
            }
        );
        let MasterStep::Next { cfg, rule, .. } = step_master(&cfg, &h, &events) else {
            panic!()
        };
        assert_eq!(
            (rule, cfg.prog),
            (MasterRule::Ehdr2, Program::Plain(Expr::int(1)))
        );
    }

    #[test]
    fn eventless_run() {
        let run = run(
            parse_expr("42").unwrap(),
            Context::default(),
            &HandlerTable::new(),
            &Scenario::default(),
            10,
        );
        assert_eq!(run.outcome, Outcome::Value(Value::int(42)));
        assert!(run.trace.is_empty());
        let run2 = super::run(
            parse_expr("if true then 42 else 0").unwrap(),
            Context::default(),
            &HandlerTable::new(),
            &Scenario::default(),
            10,
        );
        assert_eq!(rules(&run2), ["Eexpr/If2"]);
    }

    #[test]
    fn handler_runs_atomically_before_application() {
        let sc = parse_scenario("event e := tell a; at 1 inject e at 1 inject e").unwrap();
        let h = parse_handlers("on e => let x = tell(@b) in ()").unwrap();
        let r = run(
            parse_expr("let y = 1 in let z = 2 in z").unwrap(),
            Context::default(),
            &h,
            &sc,
            100,
        );
        assert_eq!(r.outcome, Outcome::Value(Value::int(2)));
        assert_eq!(
            rules(&r),
            [
                "Eexpr/Let2",
                "Enew",
                "Enew",
                "Eman",
                "Ehdr1/Tell2",
                "Ehdr1/Let2",
                "Ehdr2",
                "Eman",
                "Ehdr1/Tell2",
                "Ehdr1/Let2",
                "Ehdr2",
                "Eexpr/Let2"
            ]
        );
        assert_eq!(r.trace[3].added, [Fact::prop("a")]);
        assert_eq!(r.trace[3].queue, ["e"]);
    }

    #[test]
    fn idle_program_receives_late_events() {
        let sc = parse_scenario("event e := tell a; at 50 inject e").unwrap();
        let r = run(
            Expr::int(1),
            Context::default(),
            &HandlerTable::new(),
            &sc,
            100,
        );
        assert_eq!(rules(&r), ["Enew", "Eman", "Ehdr2"]);
        assert!(r.last.ctx.contains(&Fact::prop("a")));
    }

    #[test]
    fn budget() {
        let r = run(
            parse_expr("(fun f(x) = f x) 0").unwrap(),
            Context::default(),
            &HandlerTable::new(),
            &Scenario::default(),
            25,
        );
        assert_eq!(
            (r.outcome, r.trace.len()),
            (Outcome::BudgetExceeded(25), 25)
        );
    }
}
