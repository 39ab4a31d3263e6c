//! The context: a stratified Datalog knowledge base.
//!
//! A [`Context`] holds an insertion-ordered set of ground facts, a list of
//! rules and the one-bit event mark. Goals are answered by [`solve`], which
//! evaluates the program bottom-up (semi-naive, stratum by stratum) and then
//! matches the goal against the computed model.

mod eval;
mod parse;
mod stratify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexSet;
use serde::Serialize;
use thiserror::Error;

use crate::lexer::SyntaxError;

pub use eval::{evaluate, solve, Model};
pub(crate) use parse::{parse_atom_at, parse_goal_at};
pub use parse::{parse_datalog, parse_fact, parse_goal};
pub use stratify::stratify;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatalogError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("variable ?{0} does not occur in a positive body atom")]
    RangeRestriction(String),
    #[error("negation cycle through {}", .0.join(", "))]
    CyclicNegation(Vec<String>),
    #[error("comparison reached with unbound variable ?{0}")]
    UnboundConstraint(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Sym(String),
}

impl Constant {
    pub fn sym(s: impl Into<String>) -> Self {
        Constant::Sym(s.into())
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Constant),
    Var(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn sym(name: impl Into<String>) -> Self {
        Term::Const(Constant::Sym(name.into()))
    }

    pub fn int(n: i64) -> Self {
        Term::Const(Constant::Int(n))
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    fn resolve(&self, theta: &Substitution) -> Option<Constant> {
        match self {
            Term::Const(c) => Some(c.clone()),
            Term::Var(v) => theta.get(v).cloned(),
        }
    }

    fn apply(&self, theta: &Substitution) -> Term {
        match self.resolve(theta) {
            Some(c) => Term::Const(c),
            None => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "{c}"),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

/// A ground atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<Constant>,
}

impl Fact {
    pub fn new(predicate: impl Into<String>, args: Vec<Constant>) -> Self {
        Fact {
            predicate: predicate.into(),
            args,
        }
    }

    /// A zero-arity fact such as `phone_on`.
    pub fn prop(predicate: impl Into<String>) -> Self {
        Fact::new(predicate, Vec::new())
    }

    pub fn to_atom(&self) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().cloned().map(Term::Const).collect(),
        }
    }
}

impl Serialize for Fact {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn write_args<T: fmt::Display>(f: &mut fmt::Formatter<'_>, pred: &str, args: &[T]) -> fmt::Result {
    f.write_str(pred)?;
    if !args.is_empty() {
        f.write_str("(")?;
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_args(f, &self.predicate, &self.args)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    /// The fact this atom denotes, if it is ground.
    pub fn to_fact(&self) -> Option<Fact> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Fact::new(self.predicate.clone(), args))
    }

    pub fn apply(&self, theta: &Substitution) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|t| t.apply(theta)).collect(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_args(f, &self.predicate, &self.args)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
        CmpOp::Eq,
        CmpOp::Ne,
    ];

    /// Integers compare numerically; `=` and `!=` compare any constants
    /// structurally. Ordering a symbol never holds.
    pub fn holds(self, lhs: &Constant, rhs: &Constant) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            _ => match (lhs, rhs) {
                (Constant::Int(a), Constant::Int(b)) => match self {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Eq | CmpOp::Ne => unreachable!(),
                },
                _ => false,
            },
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub op: CmpOp,
    pub lhs: Term,
    pub rhs: Term,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// A body or goal literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Cmp(Constraint),
}

impl Literal {
    pub fn vars(&self) -> Vec<&str> {
        match self {
            Literal::Pos(a) | Literal::Neg(a) => a.vars().collect(),
            Literal::Cmp(c) => [&c.lhs, &c.rhs]
                .into_iter()
                .filter_map(|t| match t {
                    Term::Var(v) => Some(v.as_str()),
                    Term::Const(_) => None,
                })
                .collect(),
        }
    }

    pub fn apply(&self, theta: &Substitution) -> Literal {
        match self {
            Literal::Pos(a) => Literal::Pos(a.apply(theta)),
            Literal::Neg(a) => Literal::Neg(a.apply(theta)),
            Literal::Cmp(c) => Literal::Cmp(Constraint {
                op: c.op,
                lhs: c.lhs.apply(theta),
                rhs: c.rhs.apply(theta),
            }),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "not {a}"),
            Literal::Cmp(c) => write!(f, "{c}"),
        }
    }
}

/// Every variable of `extra` and of the non-positive literals must occur
/// in some positive literal.
fn check_range_restriction<'a>(
    body: &'a [Literal],
    extra: impl IntoIterator<Item = &'a str>,
) -> Result<(), DatalogError> {
    let bound: BTreeSet<&str> = body
        .iter()
        .filter_map(|l| match l {
            Literal::Pos(a) => Some(a.vars()),
            _ => None,
        })
        .flatten()
        .collect();
    let needed = extra.into_iter().chain(
        body.iter()
            .filter(|l| !matches!(l, Literal::Pos(_)))
            .flat_map(|l| l.vars()),
    );
    for v in needed {
        if !bound.contains(v) {
            return Err(DatalogError::RangeRestriction(v.to_string()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    head: Atom,
    body: Vec<Literal>,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Literal>) -> Result<Self, DatalogError> {
        check_range_restriction(&body, head.vars())?;
        Ok(Rule { head, body })
    }

    pub fn head(&self) -> &Atom {
        &self.head
    }

    pub fn body(&self) -> &[Literal] {
        &self.body
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            write_literals(f, &self.body)?;
        }
        f.write_str(".")
    }
}

fn write_literals(f: &mut fmt::Formatter<'_>, lits: &[Literal]) -> fmt::Result {
    for (i, l) in lits.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

/// A conjunctive query. The empty goal always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Goal {
    literals: Vec<Literal>,
}

impl Goal {
    pub fn new(literals: Vec<Literal>) -> Result<Self, DatalogError> {
        check_range_restriction(&literals, [])?;
        Ok(Goal { literals })
    }

    pub fn empty() -> Self {
        Goal::default()
    }

    /// The goal asking for exactly this fact.
    pub fn fact(f: &Fact) -> Self {
        Goal {
            literals: vec![Literal::Pos(f.to_atom())],
        }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for v in self.literals.iter().flat_map(|l| l.vars()) {
            if !seen.iter().any(|s| s == v) {
                seen.push(v.to_string());
            }
        }
        seen
    }

    pub fn apply(&self, theta: &Substitution) -> Goal {
        Goal {
            literals: self.literals.iter().map(|l| l.apply(theta)).collect(),
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_literals(f, &self.literals)
    }
}

impl Serialize for Goal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A finite map from variable names to constants.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Substitution(BTreeMap<String, Constant>);

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn get(&self, var: &str) -> Option<&Constant> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: impl Into<String>, c: Constant) -> Option<Constant> {
        self.0.insert(var.into(), c)
    }

    pub fn remove(&mut self, var: &str) -> Option<Constant> {
        self.0.remove(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Constant)> {
        self.0.iter()
    }

    pub(crate) fn retain(&mut self, keep: impl Fn(&str) -> bool) {
        self.0.retain(|k, _| keep(k));
    }
}

impl FromIterator<(String, Constant)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Constant)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "?{k} -> {v}")?;
        }
        f.write_str("}")
    }
}

/// The ● annotation on a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    #[default]
    Plain,
    Ev,
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mark::Plain => "plain",
            Mark::Ev => "ev",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Context {
    facts: IndexSet<Fact>,
    rules: Vec<Rule>,
    mark: Mark,
}

impl Context {
    /// Builds a plain-marked context, rejecting unstratifiable rule sets.
    pub fn new(
        facts: impl IntoIterator<Item = Fact>,
        rules: Vec<Rule>,
    ) -> Result<Self, DatalogError> {
        stratify::stratify_indices(&rules)?;
        Ok(Context {
            facts: facts.into_iter().collect(),
            rules,
            mark: Mark::Plain,
        })
    }

    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Self {
        Context {
            facts: facts.into_iter().collect(),
            ..Context::default()
        }
    }

    /// Parses a `.ctx` source.
    pub fn parse(src: &str) -> Result<Self, DatalogError> {
        let (facts, rules) = parse_datalog(src)?;
        Context::new(facts, rules)
    }

    pub fn facts(&self) -> impl ExactSizeIterator<Item = &Fact> {
        self.facts.iter()
    }

    pub fn contains(&self, f: &Fact) -> bool {
        self.facts.contains(f)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn mark(&self) -> Mark {
        self.mark
    }

    pub fn set_mark(&mut self, mark: Mark) {
        self.mark = mark;
    }

    pub fn with_mark(mut self, mark: Mark) -> Self {
        self.mark = mark;
        self
    }

    /// Adds `f`; returns whether it was absent.
    pub fn insert(&mut self, f: Fact) -> bool {
        self.facts.insert(f)
    }

    /// Removes `f` keeping the order of the remaining facts; returns whether
    /// it was present.
    pub fn remove(&mut self, f: &Fact) -> bool {
        self.facts.shift_remove(f)
    }

    /// Facts of `self` missing from `other`, in `self`'s order.
    pub fn facts_not_in<'a>(&'a self, other: &'a Context) -> impl Iterator<Item = &'a Fact> {
        self.facts.iter().filter(move |f| !other.facts.contains(*f))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.facts {
            writeln!(f, "{fact}.")?;
        }
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

/// `C ∪ {F}`.
pub fn tell_fact(ctx: &Context, f: Fact) -> Context {
    let mut next = ctx.clone();
    next.insert(f);
    next
}

/// `C \ {F}`. Rules are untouched, so a derivable fact stays derivable.
pub fn retract_fact(ctx: &Context, f: &Fact) -> Context {
    let mut next = ctx.clone();
    next.remove(f);
    next
}
