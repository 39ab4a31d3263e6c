//! Abstract syntax of the functional component.

use std::collections::BTreeMap;
use std::fmt;

use crate::datalog::{Atom, Constant, Fact, Goal};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Const {
    Unit,
    Bool(bool),
    Int(i64),
    Str(String),
    /// A Datalog symbol flowing into the host language, written `'name`.
    Sym(String),
}

impl From<Constant> for Const {
    fn from(c: Constant) -> Self {
        match c {
            Constant::Int(n) => Const::Int(n),
            Constant::Sym(s) => Const::Sym(s),
        }
    }
}

/// One `<- G. e` alternative of a behavioural variation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub goal: Goal,
    pub body: Expr,
}

impl Case {
    pub fn new(goal: Goal, body: Expr) -> Self {
        Case { goal, body }
    }
}

/// An external primitive declared with a fixed result. It collects
/// `arity` arguments and then returns `result`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prim {
    pub name: String,
    pub arity: usize,
    pub result: Const,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Const(Const),
    /// `λ_f x. e`
    Fun {
        name: String,
        param: String,
        body: Box<Expr>,
    },
    /// `(x){Va}`
    Variation {
        param: String,
        cases: Vec<Case>,
    },
    Fact(Fact),
    Prim(Prim),
}

impl Value {
    pub fn unit() -> Self {
        Value::Const(Const::Unit)
    }

    pub fn int(n: i64) -> Self {
        Value::Const(Const::Int(n))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Const(Const::Unit) => "unit",
            Value::Const(Const::Bool(_)) => "boolean",
            Value::Const(Const::Int(_)) => "integer",
            Value::Const(Const::Str(_)) => "string",
            Value::Const(Const::Sym(_)) => "symbol",
            Value::Fun { .. } => "function",
            Value::Variation { .. } => "behavioural variation",
            Value::Fact(_) => "fact",
            Value::Prim(_) => "primitive",
        }
    }
}

/// Data recorded by a checkpoint: the goal that selected the running
/// alternative, the parameter environment at selection time and the
/// expression to restart from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub goal: Goal,
    pub env: PEnv,
    pub resume: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Value(Value),
    Var(String),
    /// A parameter `~x`.
    Param(String),
    /// A goal variable `?x`, bound by the goal of an enclosing alternative.
    GoalVar(String),
    /// A fact literal that still mentions goal variables.
    FactPattern(Atom),
    App(Box<Expr>, Box<Expr>),
    Let {
        var: String,
        bound: Box<Expr>,
        body: Box<Expr>,
    },
    Dlet {
        param: String,
        bound: Box<Expr>,
        goal: Goal,
        body: Box<Expr>,
    },
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Tell(Box<Expr>),
    Retract(Box<Expr>),
    Append(Box<Expr>, Box<Expr>),
    VaApp(Box<Expr>, Box<Expr>),
    /// `e^(G, ρ, e')`, produced by dispatching.
    Checkpointed(Box<Expr>, Box<Checkpoint>),
    /// The body of a `dlet` under evaluation; remembers which parameter
    /// binding to pop when it finishes.
    Overlined {
        param: String,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn unit() -> Self {
        Expr::Value(Value::unit())
    }

    pub fn int(n: i64) -> Self {
        Expr::Value(Value::int(n))
    }

    pub fn bool(b: bool) -> Self {
        Expr::Value(Value::Const(Const::Bool(b)))
    }

    pub fn str(s: impl Into<String>) -> Self {
        Expr::Value(Value::Const(Const::Str(s.into())))
    }

    pub fn sym(s: impl Into<String>) -> Self {
        Expr::Value(Value::Const(Const::Sym(s.into())))
    }

    pub fn var(x: impl Into<String>) -> Self {
        Expr::Var(x.into())
    }

    pub fn param(x: impl Into<String>) -> Self {
        Expr::Param(x.into())
    }

    pub fn fact(f: Fact) -> Self {
        Expr::Value(Value::Fact(f))
    }

    pub fn fun(name: impl Into<String>, param: impl Into<String>, body: Expr) -> Self {
        Expr::Value(Value::Fun {
            name: name.into(),
            param: param.into(),
            body: Box::new(body),
        })
    }

    pub fn variation(param: impl Into<String>, cases: Vec<Case>) -> Self {
        Expr::Value(Value::Variation {
            param: param.into(),
            cases,
        })
    }

    pub fn app(f: Expr, a: Expr) -> Self {
        Expr::App(Box::new(f), Box::new(a))
    }

    pub fn let_(var: impl Into<String>, bound: Expr, body: Expr) -> Self {
        Expr::Let {
            var: var.into(),
            bound: Box::new(bound),
            body: Box::new(body),
        }
    }

    pub fn dlet(param: impl Into<String>, bound: Expr, goal: Goal, body: Expr) -> Self {
        Expr::Dlet {
            param: param.into(),
            bound: Box::new(bound),
            goal,
            body: Box::new(body),
        }
    }

    pub fn if_(c: Expr, t: Expr, e: Expr) -> Self {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn tell(e: Expr) -> Self {
        Expr::Tell(Box::new(e))
    }

    pub fn retract(e: Expr) -> Self {
        Expr::Retract(Box::new(e))
    }

    pub fn append(a: Expr, b: Expr) -> Self {
        Expr::Append(Box::new(a), Box::new(b))
    }

    pub fn va_app(bv: Expr, arg: Expr) -> Self {
        Expr::VaApp(Box::new(bv), Box::new(arg))
    }

    pub fn is_value(&self) -> bool {
        matches!(self, Expr::Value(_))
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Expr::Value(v) => Some(v),
            _ => None,
        }
    }

    /// Whether the expression contains a checkpoint or overline node.
    pub fn has_aux(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Checkpointed(..) | Expr::Overlined { .. }));
        found
    }

    /// Pre-order traversal over every sub-expression, including bodies of
    /// function and variation values.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Value(v) => match v {
                Value::Fun { body, .. } => body.walk(f),
                Value::Variation { cases, .. } => cases.iter().for_each(|c| c.body.walk(f)),
                Value::Const(_) | Value::Fact(_) | Value::Prim(_) => {}
            },
            Expr::Var(_) | Expr::Param(_) | Expr::GoalVar(_) | Expr::FactPattern(_) => {}
            Expr::App(a, b) | Expr::Append(a, b) | Expr::VaApp(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Let { bound, body, .. } | Expr::Dlet { bound, body, .. } => {
                bound.walk(f);
                body.walk(f);
            }
            Expr::If(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
            Expr::Tell(e) | Expr::Retract(e) | Expr::Overlined { body: e, .. } => e.walk(f),
            Expr::Checkpointed(e, ann) => {
                e.walk(f);
                ann.resume.walk(f);
            }
        }
    }
}

impl From<Value> for Expr {
    fn from(v: Value) -> Self {
        Expr::Value(v)
    }
}

/// ρ: each parameter maps to a stack of alternatives, most recent first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PEnv(BTreeMap<String, Vec<Case>>);

impl PEnv {
    pub fn new() -> Self {
        PEnv::default()
    }

    pub fn lookup(&self, param: &str) -> Option<&[Case]> {
        self.0.get(param).map(Vec::as_slice)
    }

    /// `ρ[x ↦ G.e, ρ(x)]`
    pub fn push(&mut self, param: &str, case: Case) {
        self.0.entry(param.to_string()).or_default().insert(0, case);
    }

    /// Drops the most recent alternative for `param`.
    pub fn pop(&mut self, param: &str) -> Option<Case> {
        let stack = self.0.get_mut(param)?;
        let top = (!stack.is_empty()).then(|| stack.remove(0));
        if stack.is_empty() {
            self.0.remove(param);
        }
        top
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<Case>)> {
        self.0.iter()
    }
}

/// `h`: event name to handler expression.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HandlerTable(BTreeMap<String, Expr>);

impl HandlerTable {
    pub fn new() -> Self {
        HandlerTable::default()
    }

    pub fn insert(&mut self, event: impl Into<String>, handler: Expr) -> Option<Expr> {
        self.0.insert(event.into(), handler)
    }

    /// `h(α)`, which is `()` when no handler is bound.
    pub fn get(&self, event: &str) -> Expr {
        self.0.get(event).cloned().unwrap_or_else(Expr::unit)
    }

    pub fn contains(&self, event: &str) -> bool {
        self.0.contains_key(event)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Expr)> {
        self.0.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Expr)> {
        self.0.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `p ::= [e1]e2 | e`
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Program {
    Plain(Expr),
    Suspended { handler: Expr, app: Expr },
}

impl Program {
    /// The application expression, suspended or not.
    pub fn app(&self) -> &Expr {
        match self {
            Program::Plain(e) | Program::Suspended { app: e, .. } => e,
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Plain(e) => write!(f, "{e}"),
            Program::Suspended { handler, app } => write!(f, "[{handler}] {app}"),
        }
    }
}
