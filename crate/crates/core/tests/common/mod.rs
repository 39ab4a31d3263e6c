//! Seeded generators and reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coda::ast::{Case, Expr, HandlerTable, Value};
use coda::datalog::{Atom, CmpOp, Constant, Constraint, Context, Fact, Goal, Literal, Rule, Term};
use coda::runtime::{Effect, EventDef, Injection, Scenario};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Datalog programs

pub const UNIVERSE: i64 = 10;
const DL_VARS: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone)]
pub struct DlProgram {
    pub arity: Vec<usize>,
    pub facts: Vec<Fact>,
    pub rules: Vec<Rule>,
}

impl DlProgram {
    pub fn context(&self) -> Context {
        Context::new(self.facts.clone(), self.rules.clone())
            .expect("generated programs are stratified")
    }

    fn pred(i: usize) -> String {
        format!("p{i}")
    }
}

fn gen_term(rng: &mut ChaCha8Rng, const_bias: f64) -> Term {
    if rng.gen_bool(const_bias) {
        Term::int(rng.gen_range(0..UNIVERSE))
    } else {
        Term::var(*DL_VARS.choose(rng).unwrap())
    }
}

fn gen_bound_term(rng: &mut ChaCha8Rng, bound: &[String]) -> Term {
    if bound.is_empty() || rng.gen_bool(0.25) {
        Term::int(rng.gen_range(0..UNIVERSE))
    } else {
        Term::var(bound.choose(rng).unwrap().clone())
    }
}

fn atom_vars(atoms: &[Atom]) -> Vec<String> {
    let set: BTreeSet<String> = atoms
        .iter()
        .flat_map(|a| a.vars().map(str::to_string))
        .collect();
    set.into_iter().collect()
}

fn gen_constraint(rng: &mut ChaCha8Rng, bound: &[String]) -> Option<Literal> {
    if bound.is_empty() {
        return None;
    }
    Some(Literal::Cmp(Constraint {
        op: *CmpOp::ALL.choose(rng).unwrap(),
        lhs: Term::var(bound.choose(rng).unwrap().clone()),
        rhs: gen_bound_term(rng, bound),
    }))
}

/// At most 4 predicates, 20 facts and 10 rules over a 10-constant universe.
/// A rule for `p_i` only mentions `p_j` with `j <= i` positively and
/// `j < i` negatively, so every program is stratified.
pub fn gen_datalog(rng: &mut ChaCha8Rng) -> DlProgram {
    let npreds = rng.gen_range(1..=4);
    let arity: Vec<usize> = (0..npreds).map(|_| rng.gen_range(0..=2)).collect();
    let mut facts = Vec::new();
    for _ in 0..rng.gen_range(0..=20) {
        let p = rng.gen_range(0..npreds);
        let args = (0..arity[p])
            .map(|_| Constant::Int(rng.gen_range(0..UNIVERSE)))
            .collect();
        facts.push(Fact::new(DlProgram::pred(p), args));
    }
    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(0..=10) {
        let head_pred = rng.gen_range(0..npreds);
        let mut pos = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let p = rng.gen_range(0..=head_pred);
            pos.push(Atom::new(
                DlProgram::pred(p),
                (0..arity[p]).map(|_| gen_term(rng, 0.3)).collect(),
            ));
        }
        let bound = atom_vars(&pos);
        let mut body: Vec<Literal> = pos.into_iter().map(Literal::Pos).collect();
        if head_pred > 0 && rng.gen_bool(0.4) {
            let p = rng.gen_range(0..head_pred);
            let args = (0..arity[p]).map(|_| gen_bound_term(rng, &bound)).collect();
            body.push(Literal::Neg(Atom::new(DlProgram::pred(p), args)));
        }
        if rng.gen_bool(0.3) {
            body.extend(gen_constraint(rng, &bound));
        }
        let head = Atom::new(
            DlProgram::pred(head_pred),
            (0..arity[head_pred])
                .map(|_| gen_bound_term(rng, &bound))
                .collect(),
        );
        body.shuffle(rng);
        rules.push(Rule::new(head, body).expect("generated rules are range restricted"));
    }
    DlProgram {
        arity,
        facts,
        rules,
    }
}

pub fn gen_dl_goal(rng: &mut ChaCha8Rng, prog: &DlProgram) -> Goal {
    let n = prog.arity.len();
    let mut pos = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let p = rng.gen_range(0..n);
        pos.push(Atom::new(
            DlProgram::pred(p),
            (0..prog.arity[p]).map(|_| gen_term(rng, 0.4)).collect(),
        ));
    }
    let bound = atom_vars(&pos);
    let mut lits: Vec<Literal> = pos.into_iter().map(Literal::Pos).collect();
    if rng.gen_bool(0.3) {
        let p = rng.gen_range(0..n);
        let args = (0..prog.arity[p])
            .map(|_| gen_bound_term(rng, &bound))
            .collect();
        lits.push(Literal::Neg(Atom::new(DlProgram::pred(p), args)));
    }
    if rng.gen_bool(0.3) {
        lits.extend(gen_constraint(rng, &bound));
    }
    Goal::new(lits).expect("generated goals are range restricted")
}

// ---------------------------------------------------------------------------
// Naive bottom-up oracle. Strata are recomputed from scratch, and every
// round re-derives all consequences from the whole model.

type Binding = BTreeMap<String, Constant>;

fn ground(t: &Term, b: &Binding) -> Option<Constant> {
    match t {
        Term::Const(c) => Some(c.clone()),
        Term::Var(v) => b.get(v).cloned(),
    }
}

fn ground_atom(a: &Atom, b: &Binding) -> Option<Fact> {
    let args = a
        .args
        .iter()
        .map(|t| ground(t, b))
        .collect::<Option<Vec<_>>>()?;
    Some(Fact::new(a.predicate.clone(), args))
}

fn compare(op: CmpOp, l: &Constant, r: &Constant) -> bool {
    use std::cmp::Ordering::*;
    let ord = match (l, r) {
        (Constant::Int(a), Constant::Int(b)) => Some(a.cmp(b)),
        _ => None,
    };
    match op {
        CmpOp::Eq => l == r,
        CmpOp::Ne => l != r,
        CmpOp::Lt => ord == Some(Less),
        CmpOp::Le => matches!(ord, Some(Less | Equal)),
        CmpOp::Gt => ord == Some(Greater),
        CmpOp::Ge => matches!(ord, Some(Greater | Equal)),
    }
}

/// Whether a literal holds under a binding that grounds it.
pub fn literal_holds(model: &BTreeSet<Fact>, lit: &Literal, b: &Binding) -> Option<bool> {
    Some(match lit {
        Literal::Pos(a) => model.contains(&ground_atom(a, b)?),
        Literal::Neg(a) => !model.contains(&ground_atom(a, b)?),
        Literal::Cmp(c) => compare(c.op, &ground(&c.lhs, b)?, &ground(&c.rhs, b)?),
    })
}

fn unify(a: &Atom, f: &Fact, b: &Binding) -> Option<Binding> {
    if a.predicate != f.predicate || a.args.len() != f.args.len() {
        return None;
    }
    let mut b = b.clone();
    for (t, c) in a.args.iter().zip(&f.args) {
        match t {
            Term::Const(k) if k != c => return None,
            Term::Const(_) => {}
            Term::Var(v) => match b.get(v) {
                Some(k) if k != c => return None,
                Some(_) => {}
                None => {
                    b.insert(v.clone(), c.clone());
                }
            },
        }
    }
    Some(b)
}

/// Every binding of the literals' variables that satisfies all of them.
pub fn all_bindings(model: &BTreeSet<Fact>, lits: &[Literal]) -> Vec<Binding> {
    let mut out = vec![Binding::new()];
    for lit in lits.iter().filter(|l| matches!(l, Literal::Pos(_))) {
        let Literal::Pos(a) = lit else { unreachable!() };
        out = out
            .iter()
            .flat_map(|b| model.iter().filter_map(move |f| unify(a, f, b)))
            .collect();
    }
    out.retain(|b| {
        lits.iter()
            .filter(|l| !matches!(l, Literal::Pos(_)))
            .all(|l| literal_holds(model, l, b) == Some(true))
    });
    out
}

fn strata(rules: &[Rule]) -> BTreeMap<String, usize> {
    let mut level = BTreeMap::<String, usize>::new();
    let cap = rules.len() + 1;
    loop {
        let mut changed = false;
        for r in rules {
            let mut need = 0;
            for l in r.body() {
                match l {
                    Literal::Pos(a) => {
                        need = need.max(level.get(&a.predicate).copied().unwrap_or(0))
                    }
                    Literal::Neg(a) => {
                        need = need.max(level.get(&a.predicate).copied().unwrap_or(0) + 1)
                    }
                    Literal::Cmp(_) => {}
                }
            }
            let cur = level.entry(r.head().predicate.clone()).or_insert(0);
            if need > *cur {
                assert!(need <= cap, "oracle given an unstratifiable program");
                *cur = need;
                changed = true;
            }
        }
        if !changed {
            return level;
        }
    }
}

pub fn oracle_model(facts: &[Fact], rules: &[Rule]) -> BTreeSet<Fact> {
    let level = strata(rules);
    let top = level.values().copied().max().unwrap_or(0);
    let mut model: BTreeSet<Fact> = facts.iter().cloned().collect();
    for s in 0..=top {
        let layer: Vec<&Rule> = rules
            .iter()
            .filter(|r| level[&r.head().predicate] == s)
            .collect();
        loop {
            let mut derived = BTreeSet::new();
            for r in &layer {
                for b in all_bindings(&model, r.body()) {
                    derived.insert(ground_atom(r.head(), &b).expect("range restricted head"));
                }
            }
            let before = model.len();
            model.extend(derived);
            if model.len() == before {
                break;
            }
        }
    }
    model
}

pub fn oracle_satisfiable(model: &BTreeSet<Fact>, goal: &Goal) -> bool {
    !all_bindings(model, goal.literals()).is_empty()
}

/// Whether `theta` binds every goal variable and grounds each literal of
/// the goal into something true in `model`.
pub fn grounds_into(
    model: &BTreeSet<Fact>,
    goal: &Goal,
    theta: &coda::datalog::Substitution,
) -> bool {
    let b: Binding = theta.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    goal.literals()
        .iter()
        .all(|l| literal_holds(model, l, &b) == Some(true))
}

// ---------------------------------------------------------------------------
// Contexts and goals over a few propositions and one unary predicate.

pub const PROPS: [&str; 4] = ["a", "b", "c", "d"];
pub const NUMS: i64 = 3;

pub fn gen_facts(rng: &mut ChaCha8Rng) -> BTreeSet<Fact> {
    let mut facts = BTreeSet::new();
    for p in PROPS {
        if rng.gen_bool(0.5) {
            facts.insert(Fact::prop(p));
        }
    }
    for k in 0..NUMS {
        if rng.gen_bool(0.4) {
            facts.insert(Fact::new("n", vec![Constant::Int(k)]));
        }
    }
    facts
}

pub fn gen_context(rng: &mut ChaCha8Rng) -> Context {
    Context::from_facts(gen_facts(rng))
}

fn prop_atom(rng: &mut ChaCha8Rng) -> Atom {
    Atom::new(*PROPS.choose(rng).unwrap(), vec![])
}

/// A goal over the propositions; with `goal_var`, possibly `n(?k)` too.
pub fn gen_prop_goal(rng: &mut ChaCha8Rng, goal_var: bool) -> Goal {
    let mut lits = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let a = prop_atom(rng);
        lits.push(if rng.gen_bool(0.3) {
            Literal::Neg(a)
        } else {
            Literal::Pos(a)
        });
    }
    if rng.gen_bool(0.25) {
        let arg = if goal_var {
            Term::var("k")
        } else {
            Term::int(rng.gen_range(0..NUMS))
        };
        lits.push(Literal::Pos(Atom::new("n", vec![arg])));
        if goal_var && rng.gen_bool(0.3) {
            lits.push(Literal::Cmp(Constraint {
                op: CmpOp::Gt,
                lhs: Term::var("k"),
                rhs: Term::int(0),
            }));
        }
    }
    Goal::new(lits).expect("range restricted")
}

/// Reference check of a goal against a rule-free set of facts.
pub fn reference_holds(facts: &BTreeSet<Fact>, goal: &Goal) -> bool {
    !all_bindings(facts, goal.literals()).is_empty()
}

/// Index of the first case whose goal holds, by the reference check.
pub fn reference_first_match(facts: &BTreeSet<Fact>, goals: &[Goal]) -> Option<usize> {
    goals.iter().position(|g| reference_holds(facts, g))
}

// ---------------------------------------------------------------------------
// Expressions

const VARS: [&str; 3] = ["x", "y", "w"];
const PARAMS: [&str; 2] = ["p", "q"];

/// Switches for [`ExprGen`].
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub depth: u32,
    /// Allow `tell`/`retract`.
    pub effects: bool,
    /// Relative weight of `dlet`.
    pub dlet_weight: u32,
    /// Allow bare `~p` uses, which may fail to dispatch.
    pub param_uses: bool,
    /// Allow variables that are free (only for syntax tests).
    pub open: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            depth: 4,
            effects: true,
            dlet_weight: 1,
            param_uses: true,
            open: false,
        }
    }
}

/// Builds closed, terminating, well-typed programs: there is no recursion,
/// conditions are boolean literals and only variations are applied with `#`.
pub struct ExprGen<'r> {
    pub rng: &'r mut ChaCha8Rng,
    pub shape: Shape,
    vars: Vec<String>,
    params: Vec<String>,
    goal_vars: Vec<String>,
}

impl<'r> ExprGen<'r> {
    pub fn new(rng: &'r mut ChaCha8Rng, shape: Shape) -> Self {
        ExprGen {
            rng,
            shape,
            vars: Vec::new(),
            params: Vec::new(),
            goal_vars: Vec::new(),
        }
    }

    pub fn expr(&mut self) -> Expr {
        self.gen(self.shape.depth)
    }

    fn scoped<T>(&mut self, var: Option<&str>, f: impl FnOnce(&mut Self) -> T) -> T {
        let n = self.vars.len();
        self.vars.extend(var.map(str::to_string));
        let out = f(self);
        self.vars.truncate(n);
        out
    }

    fn with_goal_vars<T>(&mut self, goal: &Goal, f: impl FnOnce(&mut Self) -> T) -> T {
        let n = self.goal_vars.len();
        self.goal_vars.extend(goal.vars());
        let out = f(self);
        self.goal_vars.truncate(n);
        out
    }

    pub fn leaf(&mut self) -> Expr {
        let mut choices: Vec<u8> = vec![0, 1, 2, 3, 4, 5];
        if !self.vars.is_empty() || self.shape.open {
            choices.extend([6, 6, 6]);
        }
        if self.shape.param_uses && (!self.params.is_empty() || self.shape.open) {
            choices.push(7);
        }
        if !self.goal_vars.is_empty() {
            choices.extend([8, 9]);
        }
        match *choices.choose(self.rng).unwrap() {
            0 => Expr::int(self.rng.gen_range(0..100)),
            1 => Expr::bool(self.rng.gen()),
            2 => Expr::str(
                ["", "hi", "a \"q\"", "x\\y"]
                    .choose(self.rng)
                    .unwrap()
                    .to_string(),
            ),
            3 => Expr::sym(*["red", "blue"].choose(self.rng).unwrap()),
            4 => Expr::unit(),
            5 => Expr::fact(Fact::new(
                "n",
                vec![Constant::Int(self.rng.gen_range(0..NUMS))],
            )),
            6 => {
                if self.vars.is_empty() {
                    Expr::var(*VARS.choose(self.rng).unwrap())
                } else {
                    Expr::var(self.vars.choose(self.rng).unwrap().clone())
                }
            }
            7 => {
                if self.params.is_empty() {
                    Expr::param(*PARAMS.choose(self.rng).unwrap())
                } else {
                    Expr::param(self.params.choose(self.rng).unwrap().clone())
                }
            }
            8 => Expr::GoalVar(self.goal_vars.choose(self.rng).unwrap().clone()),
            _ => Expr::FactPattern(Atom::new(
                "n",
                vec![Term::var(self.goal_vars.choose(self.rng).unwrap().clone())],
            )),
        }
    }

    pub fn variation(&mut self, depth: u32) -> Expr {
        let param = VARS.choose(self.rng).unwrap().to_string();
        let cases = (0..self.rng.gen_range(1..=3))
            .map(|_| {
                let goal = gen_prop_goal(self.rng, true);
                let body = self.with_goal_vars(&goal, |g| {
                    g.scoped(Some(&param), |g| g.gen(depth.saturating_sub(1)))
                });
                Case::new(goal, body)
            })
            .collect();
        Expr::variation(param, cases)
    }

    fn gen(&mut self, depth: u32) -> Expr {
        if depth == 0 {
            return self.leaf();
        }
        let d = depth - 1;
        let mut weights: Vec<(u8, u32)> =
            vec![(0, 2), (1, 3), (2, 1), (3, 3), (4, 1), (5, 2), (6, 1)];
        if self.shape.effects {
            weights.push((7, 2));
        }
        weights.push((8, self.shape.dlet_weight));
        let pick = weights.choose_weighted(self.rng, |w| w.1).unwrap().0;
        match pick {
            0 => self.leaf(),
            1 => {
                let x = VARS.choose(self.rng).unwrap().to_string();
                let bound = self.gen(d);
                let body = self.scoped(Some(&x), |g| g.gen(d));
                Expr::let_(x, bound, body)
            }
            2 => {
                let c = Expr::bool(self.rng.gen());
                Expr::if_(c, self.gen(d), self.gen(d))
            }
            3 => {
                let va = self.variation(d);
                let arg = self.gen(d);
                if self.rng.gen_bool(0.5) {
                    // `let v = va in #v(arg)`; a `v` inside `arg` now means the variation.
                    let v = VARS.choose(self.rng).unwrap().to_string();
                    Expr::let_(v.clone(), va, Expr::va_app(Expr::var(v), arg))
                } else {
                    Expr::va_app(va, arg)
                }
            }
            4 => {
                let lhs = self.variation(d);
                let rhs = self.variation(d);
                Expr::va_app(Expr::append(lhs, rhs), self.gen(d))
            }
            5 => {
                let f = "f".to_string();
                let y = VARS.choose(self.rng).unwrap().to_string();
                // The function name stays out of scope: no recursion.
                let body = self.scoped(Some(&y), |g| g.gen(d));
                Expr::app(Expr::fun(f, y, body), self.gen(d))
            }
            6 => Expr::fact(Fact::prop(*PROPS.choose(self.rng).unwrap())),
            7 => {
                let fact = Expr::fact(Fact::prop(*PROPS.choose(self.rng).unwrap()));
                let eff = if self.rng.gen_bool(0.5) {
                    Expr::tell(fact)
                } else {
                    Expr::retract(fact)
                };
                if self.rng.gen_bool(0.3) {
                    eff
                } else {
                    Expr::let_("u", eff, self.gen(d))
                }
            }
            _ => {
                let p = PARAMS.choose(self.rng).unwrap().to_string();
                let goal = gen_prop_goal(self.rng, true);
                let bound = self.with_goal_vars(&goal, |g| g.gen(d));
                self.params.push(p.clone());
                let body = self.gen(d);
                self.params.pop();
                Expr::dlet(p, bound, goal, body)
            }
        }
    }
}

pub fn gen_expr(rng: &mut ChaCha8Rng, shape: Shape) -> Expr {
    ExprGen::new(rng, shape).expr()
}

/// A variation `(x){...}` whose case bodies run for a few steps.
pub fn gen_variation(rng: &mut ChaCha8Rng, max_cases: usize) -> (String, Vec<Case>) {
    let param = VARS.choose(rng).unwrap().to_string();
    let n = rng.gen_range(1..=max_cases);
    let cases = (0..n)
        .map(|i| {
            let goal_var = rng.gen_bool(0.5);
            let goal = gen_prop_goal(rng, goal_var);
            let mut body = Expr::int(i as i64);
            for _ in 0..rng.gen_range(2..=4) {
                body = Expr::let_("t", Expr::int(rng.gen_range(0..10)), body);
            }
            Case::new(goal, body)
        })
        .collect();
    (param, cases)
}

// ---------------------------------------------------------------------------
// Bundles

#[derive(Debug, Clone)]
pub struct RandomBundle {
    pub program: Expr,
    pub ctx: Context,
    pub handlers: HandlerTable,
    pub scenario: Scenario,
}

fn gen_effect(rng: &mut ChaCha8Rng) -> Effect {
    let f = Fact::prop(*PROPS.choose(rng).unwrap());
    if rng.gen_bool(0.5) {
        Effect::Tell(f)
    } else {
        Effect::Retract(f)
    }
}

pub fn gen_handler(rng: &mut ChaCha8Rng) -> Expr {
    let mut e = if rng.gen_bool(0.5) {
        Expr::unit()
    } else {
        Expr::int(rng.gen_range(0..10))
    };
    for _ in 0..rng.gen_range(0..=2) {
        let fact = Expr::fact(Fact::prop(*PROPS.choose(rng).unwrap()));
        let eff = if rng.gen_bool(0.6) {
            Expr::tell(fact)
        } else {
            Expr::retract(fact)
        };
        e = Expr::let_("u", eff, e);
    }
    e
}

/// A small program, 1-5 events with handlers and a random injection schedule.
pub fn gen_bundle(rng: &mut ChaCha8Rng) -> RandomBundle {
    let program = gen_expr(
        rng,
        Shape {
            depth: 4,
            ..Shape::default()
        },
    );
    let ctx = gen_context(rng);
    let nevents = rng.gen_range(1..=5);
    let mut handlers = HandlerTable::new();
    let mut events = BTreeMap::new();
    for i in 0..nevents {
        let name = format!("e{i}");
        let effects = (0..rng.gen_range(0..=3)).map(|_| gen_effect(rng)).collect();
        events.insert(name.clone(), EventDef::new(name.clone(), effects));
        if rng.gen_bool(0.8) {
            handlers.insert(name, gen_handler(rng));
        }
    }
    let mut at: Vec<usize> = (0..rng.gen_range(1..=6))
        .map(|_| rng.gen_range(0..15))
        .collect();
    at.sort_unstable();
    let injections = at
        .into_iter()
        .map(|at| Injection {
            at,
            event: format!("e{}", rng.gen_range(0..nevents)),
        })
        .collect();
    RandomBundle {
        program,
        ctx,
        handlers,
        scenario: Scenario { events, injections },
    }
}

pub fn facts_of(ctx: &Context) -> BTreeSet<Fact> {
    ctx.facts().cloned().collect()
}

pub fn is_value(e: &Expr) -> Option<&Value> {
    e.as_value()
}
