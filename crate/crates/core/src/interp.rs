//! The slave transition system: one deterministic small step
//! `⟨ρ, C, e⟩ → ⟨ρ', C', e'⟩`, dispatching, and checkpoint recovery.
//!
//! Evaluation is call-by-value, left to right. A step walks the path from
//! the root to the active redex. When the context carries the event mark,
//! every checkpoint on that path is re-validated outside-in; the first one
//! whose goal no longer holds is replaced by its resume expression and the
//! environment is reset to its snapshot.

use std::fmt;

use thiserror::Error;

use crate::ast::{Case, Checkpoint, Const, Expr, PEnv, Value};
use crate::datalog::{solve, Context, DatalogError, Goal, Mark};
use crate::subst::{all_names, fresh_var, instantiate, subst_expr, substitute};

/// The case selected by [`dsp`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    /// Position of the selected case in the variation.
    pub index: usize,
    /// The case body with the goal's substitution applied.
    pub body: Expr,
    /// The instantiated goal `Gθ`.
    pub goal: Goal,
}

/// Finds the first case whose goal holds in `ctx`.
pub fn dsp(ctx: &Context, cases: &[Case]) -> Result<Option<Dispatch>, DatalogError> {
    for (index, case) in cases.iter().enumerate() {
        if let Some(theta) = solve(ctx, &case.goal)? {
            return Ok(Some(Dispatch {
                index,
                body: instantiate(&case.body, &theta),
                goal: case.goal.apply(&theta),
            }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlaveConfig {
    pub env: PEnv,
    pub ctx: Context,
    pub expr: Expr,
}

impl SlaveConfig {
    pub fn new(env: PEnv, ctx: Context, expr: Expr) -> Self {
        SlaveConfig { env, ctx, expr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlaveRule {
    If2,
    If3,
    Let2,
    App3,
    /// Application of an external primitive.
    Prim,
    Tell2,
    Retract2,
    Dlet1,
    Dlet3,
    Append3,
    VaApp3,
    Dynvar,
    Brk2,
    Brk4,
}

impl fmt::Display for SlaveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// What a successful step did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    /// The axiom at the redex.
    pub rule: SlaveRule,
    /// Checkpoint goals on the path were re-checked and all held.
    pub validated: bool,
    /// Set by `VaApp3` and `Dynvar`.
    pub dispatch: Option<(usize, Goal)>,
    /// Set by `Brk4`: the annotation that was restored.
    pub restored: Option<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("adaptation failure: no goal of {} holds in the context", render_cases(.cases))]
pub struct AdaptationFailure {
    pub cases: Vec<Case>,
    pub ctx: Context,
    pub redex: Expr,
}

fn render_cases(cases: &[Case]) -> String {
    let goals: Vec<String> = cases
        .iter()
        .map(|c| {
            if c.goal.is_empty() {
                "<-".into()
            } else {
                format!("<- {}", c.goal)
            }
        })
        .collect();
    format!("[{}]", goals.join(", "))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StuckReason {
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    UnboundParameter(String),
    FreeVariable(String),
    Datalog(DatalogError),
    StepBudgetExceeded(usize),
}

impl fmt::Display for StuckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StuckReason::TypeMismatch { expected, found } => {
                write!(f, "type mismatch: expected {expected}, found {found}")
            }
            StuckReason::UnboundParameter(x) => write!(f, "parameter ~{x} is not bound"),
            StuckReason::FreeVariable(x) => write!(f, "free variable {x}"),
            StuckReason::Datalog(e) => write!(f, "context query failed: {e}"),
            StuckReason::StepBudgetExceeded(n) => write!(f, "step budget of {n} exhausted"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason} at `{redex}`")]
pub struct Stuck {
    pub reason: StuckReason,
    pub redex: Expr,
    pub ctx: Context,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Next(SlaveConfig, Reduction),
    Done(Value),
    Failed(AdaptationFailure),
    Stuck(Stuck),
}

/// When a step clears the event mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkPolicy {
    /// Any step clears it. Used for the application expression.
    #[default]
    Discharge,
    /// Only a step that went through a checkpoint (`Brk3`/`Brk4`) clears it.
    /// Used for handler expressions.
    CheckpointsOnly,
}

// Boxed: both carry a whole context and the `Result`s are hot.
enum Halt {
    Failed(Box<AdaptationFailure>),
    Stuck(Box<Stuck>),
}

struct Machine<'a> {
    env: &'a mut PEnv,
    ctx: &'a mut Context,
    validating: bool,
    validated: bool,
    rule: Option<SlaveRule>,
    dispatch: Option<(usize, Goal)>,
    restored: Option<Checkpoint>,
}

impl Machine<'_> {
    fn stuck(&self, reason: StuckReason, redex: &Expr) -> Halt {
        Halt::Stuck(Box::new(Stuck {
            reason,
            redex: redex.clone(),
            ctx: self.ctx.clone(),
        }))
    }

    fn mismatch(&self, expected: &'static str, found: &Value, redex: &Expr) -> Halt {
        self.stuck(
            StuckReason::TypeMismatch {
                expected,
                found: found.kind(),
            },
            redex,
        )
    }

    fn fire(&mut self, rule: SlaveRule, result: Expr) -> Result<Expr, Halt> {
        self.rule = Some(rule);
        Ok(result)
    }

    fn dispatch(&mut self, cases: &[Case], redex: &Expr) -> Result<Dispatch, Halt> {
        match dsp(self.ctx, cases) {
            Ok(Some(d)) => Ok(d),
            Ok(None) => Err(Halt::Failed(Box::new(AdaptationFailure {
                cases: cases.to_vec(),
                ctx: self.ctx.clone(),
                redex: redex.clone(),
            }))),
            Err(e) => Err(self.stuck(StuckReason::Datalog(e), redex)),
        }
    }

    /// Reduces the non-value expression `e` by one step.
    fn reduce(&mut self, e: &Expr) -> Result<Expr, Halt> {
        match e {
            Expr::Value(_) => unreachable!("values do not reduce"),
            Expr::Var(x) => Err(self.stuck(StuckReason::FreeVariable(x.clone()), e)),
            Expr::GoalVar(x) => Err(self.stuck(StuckReason::FreeVariable(format!("?{x}")), e)),
            Expr::FactPattern(a) => {
                let v = a.vars().next().unwrap_or_default();
                Err(self.stuck(StuckReason::FreeVariable(format!("?{v}")), e))
            }
            Expr::Param(x) => {
                let Some(cases) = self.env.lookup(x).map(<[Case]>::to_vec) else {
                    return Err(self.stuck(StuckReason::UnboundParameter(x.clone()), e));
                };
                let d = self.dispatch(&cases, e)?;
                self.dispatch = Some((d.index, d.goal.clone()));
                let ann = Checkpoint {
                    goal: d.goal,
                    env: self.env.clone(),
                    resume: e.clone(),
                };
                self.fire(
                    SlaveRule::Dynvar,
                    Expr::Checkpointed(Box::new(d.body), Box::new(ann)),
                )
            }
            Expr::App(f, a) => {
                let Some(fv) = f.as_value() else {
                    return Ok(Expr::app(self.reduce(f)?, (**a).clone()));
                };
                let Some(av) = a.as_value() else {
                    return Ok(Expr::app((**f).clone(), self.reduce(a)?));
                };
                match fv {
                    Value::Fun { name, param, body } => {
                        let body = substitute(body, param, av);
                        let body = if name == param {
                            body
                        } else {
                            substitute(&body, name, fv)
                        };
                        self.fire(SlaveRule::App3, body)
                    }
                    Value::Prim(p) => {
                        let mut p = p.clone();
                        p.args.push(av.clone());
                        let result = if p.args.len() >= p.arity {
                            Value::Const(p.result.clone())
                        } else {
                            Value::Prim(p)
                        };
                        self.fire(SlaveRule::Prim, Expr::Value(result))
                    }
                    other => Err(self.mismatch("function", other, e)),
                }
            }
            Expr::Let { var, bound, body } => match bound.as_value() {
                None => Ok(Expr::let_(
                    var.clone(),
                    self.reduce(bound)?,
                    (**body).clone(),
                )),
                Some(v) => self.fire(SlaveRule::Let2, substitute(body, var, v)),
            },
            Expr::If(c, t, f) => match c.as_value() {
                None => Ok(Expr::if_(self.reduce(c)?, (**t).clone(), (**f).clone())),
                Some(Value::Const(Const::Bool(true))) => self.fire(SlaveRule::If2, (**t).clone()),
                Some(Value::Const(Const::Bool(false))) => self.fire(SlaveRule::If3, (**f).clone()),
                Some(other) => Err(self.mismatch("boolean", other, e)),
            },
            Expr::Tell(a) | Expr::Retract(a) => {
                let tell = matches!(e, Expr::Tell(_));
                match a.as_value() {
                    None => {
                        let a = self.reduce(a)?;
                        Ok(if tell {
                            Expr::tell(a)
                        } else {
                            Expr::retract(a)
                        })
                    }
                    Some(Value::Fact(fact)) => {
                        if tell {
                            self.ctx.insert(fact.clone());
                            self.fire(SlaveRule::Tell2, Expr::unit())
                        } else {
                            self.ctx.remove(fact);
                            self.fire(SlaveRule::Retract2, Expr::unit())
                        }
                    }
                    Some(other) => Err(self.mismatch("fact", other, e)),
                }
            }
            Expr::Dlet {
                param,
                bound,
                goal,
                body,
            } => {
                self.env
                    .push(param, Case::new(goal.clone(), (**bound).clone()));
                self.fire(
                    SlaveRule::Dlet1,
                    Expr::Overlined {
                        param: param.clone(),
                        body: body.clone(),
                    },
                )
            }
            Expr::Overlined { param, body } => match body.as_value() {
                None => Ok(Expr::Overlined {
                    param: param.clone(),
                    body: Box::new(self.reduce(body)?),
                }),
                Some(_) => {
                    self.env.pop(param);
                    self.fire(SlaveRule::Dlet3, (**body).clone())
                }
            },
            Expr::Append(l, r) => {
                let Some(lv) = l.as_value() else {
                    return Ok(Expr::append(self.reduce(l)?, (**r).clone()));
                };
                let Some(rv) = r.as_value() else {
                    return Ok(Expr::append((**l).clone(), self.reduce(r)?));
                };
                match (lv, rv) {
                    (
                        Value::Variation {
                            param: x,
                            cases: c1,
                        },
                        Value::Variation {
                            param: y,
                            cases: c2,
                        },
                    ) => {
                        let mut avoid = all_names(l);
                        avoid.extend(all_names(r));
                        let z = fresh_var("z", &avoid);
                        let rename = |x: &str, cases: &[Case]| -> Vec<Case> {
                            cases
                                .iter()
                                .map(|c| {
                                    Case::new(
                                        c.goal.clone(),
                                        subst_expr(&c.body, x, &Expr::Var(z.clone())),
                                    )
                                })
                                .collect()
                        };
                        let mut cases = rename(x, c1);
                        cases.extend(rename(y, c2));
                        self.fire(SlaveRule::Append3, Expr::variation(z.clone(), cases))
                    }
                    (Value::Variation { .. }, other) | (other, _) => {
                        Err(self.mismatch("behavioural variation", other, e))
                    }
                }
            }
            Expr::VaApp(bv, a) => {
                let Some(bvv) = bv.as_value() else {
                    return Ok(Expr::va_app(self.reduce(bv)?, (**a).clone()));
                };
                let Some(av) = a.as_value() else {
                    return Ok(Expr::va_app((**bv).clone(), self.reduce(a)?));
                };
                let Value::Variation { param, cases } = bvv else {
                    return Err(self.mismatch("behavioural variation", bvv, e));
                };
                let d = self.dispatch(cases, e)?;
                self.dispatch = Some((d.index, d.goal.clone()));
                let ann = Checkpoint {
                    goal: d.goal,
                    env: self.env.clone(),
                    resume: e.clone(),
                };
                let body = substitute(&d.body, param, av);
                self.fire(
                    SlaveRule::VaApp3,
                    Expr::Checkpointed(Box::new(body), Box::new(ann)),
                )
            }
            Expr::Checkpointed(inner, ann) => {
                if self.validating {
                    match solve(self.ctx, &ann.goal) {
                        Err(err) => return Err(self.stuck(StuckReason::Datalog(err), e)),
                        Ok(None) => {
                            *self.env = ann.env.clone();
                            self.restored = Some((**ann).clone());
                            return self.fire(SlaveRule::Brk4, ann.resume.clone());
                        }
                        Ok(Some(_)) => self.validated = true,
                    }
                }
                match inner.as_value() {
                    Some(_) => self.fire(SlaveRule::Brk2, (**inner).clone()),
                    None => Ok(Expr::Checkpointed(
                        Box::new(self.reduce(inner)?),
                        ann.clone(),
                    )),
                }
            }
        }
    }
}

/// One step under [`MarkPolicy::Discharge`].
pub fn step_slave(cfg: &SlaveConfig) -> StepOutcome {
    step_slave_with(cfg, MarkPolicy::Discharge)
}

pub fn step_slave_with(cfg: &SlaveConfig, policy: MarkPolicy) -> StepOutcome {
    if let Some(v) = cfg.expr.as_value() {
        return StepOutcome::Done(v.clone());
    }
    let mut env = cfg.env.clone();
    let mut ctx = cfg.ctx.clone();
    let marked = ctx.mark() == Mark::Ev;
    let mut m = Machine {
        env: &mut env,
        ctx: &mut ctx,
        validating: marked,
        validated: false,
        rule: None,
        dispatch: None,
        restored: None,
    };
    let expr = match m.reduce(&cfg.expr) {
        Ok(e) => e,
        Err(Halt::Failed(f)) => return StepOutcome::Failed(*f),
        Err(Halt::Stuck(s)) => return StepOutcome::Stuck(*s),
    };
    let reduction = Reduction {
        rule: m.rule.expect("every successful step fires an axiom"),
        validated: m.validated,
        dispatch: m.dispatch,
        restored: m.restored,
    };
    let through_checkpoint = reduction.validated || reduction.restored.is_some();
    if marked && (policy == MarkPolicy::Discharge || through_checkpoint) {
        ctx.set_mark(Mark::Plain);
    }
    StepOutcome::Next(SlaveConfig { env, ctx, expr }, reduction)
}

/// Result of [`run_to_value`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlaveRun {
    /// `Done`, `Failed` or `Stuck`; never `Next`.
    pub outcome: StepOutcome,
    /// Every configuration visited, starting with the initial one.
    pub trace: Vec<SlaveConfig>,
}

/// Steps until a value, a failure, or `max_steps` reductions.
pub fn run_to_value(cfg: SlaveConfig, max_steps: usize) -> SlaveRun {
    let mut trace = vec![cfg];
    loop {
        let current = trace.last().expect("trace starts non-empty");
        let outcome = step_slave(current);
        match outcome {
            StepOutcome::Next(next, _) => {
                if trace.len() > max_steps {
                    let last = trace.last().expect("non-empty");
                    let stuck = Stuck {
                        reason: StuckReason::StepBudgetExceeded(max_steps),
                        redex: last.expr.clone(),
                        ctx: last.ctx.clone(),
                    };
                    return SlaveRun {
                        outcome: StepOutcome::Stuck(stuck),
                        trace,
                    };
                }
                trace.push(next);
            }
            outcome => return SlaveRun { outcome, trace },
        }
    }
}
