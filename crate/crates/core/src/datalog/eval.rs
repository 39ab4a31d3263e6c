//! Semi-naive bottom-up evaluation and goal answering.
//!
//! The model keeps facts in a fixed order: the context's facts in insertion
//! order, then derived facts in the order they were found (rules in program
//! order, body atoms left to right). Goals are matched against the model in
//! that order, which fixes the substitution [`solve`] returns.

use std::collections::HashMap;
use std::ops::Range;

use indexmap::IndexSet;

use super::stratify::stratify_indices;
use super::{Atom, Constant, Context, DatalogError, Fact, Goal, Literal, Substitution, Term};

/// The least model of a context.
#[derive(Debug, Clone, Default)]
pub struct Model {
    facts: IndexSet<Fact>,
    by_pred: HashMap<String, Vec<usize>>,
}

impl Model {
    fn push(&mut self, f: Fact) -> bool {
        let pred = f.predicate.clone();
        let (idx, fresh) = self.facts.insert_full(f);
        if fresh {
            self.by_pred.entry(pred).or_default().push(idx);
        }
        fresh
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, f: &Fact) -> bool {
        self.facts.contains(f)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter()
    }

    /// Facts of `pred` whose model position lies in `window`, in order.
    fn scan<'a>(&'a self, pred: &str, window: Range<usize>) -> impl Iterator<Item = &'a Fact> + 'a {
        let idxs: &[usize] = self.by_pred.get(pred).map(Vec::as_slice).unwrap_or(&[]);
        let start = idxs.partition_point(|&i| i < window.start);
        let end = idxs.partition_point(|&i| i < window.end);
        idxs[start..end].iter().map(move |&i| &self.facts[i])
    }
}

/// Positive atoms in order, with each filter (negation or comparison)
/// scheduled right after the positive atom that binds its last variable.
struct Plan<'a> {
    positives: Vec<&'a Atom>,
    filters: Vec<Vec<&'a Literal>>,
}

impl<'a> Plan<'a> {
    fn new(body: &'a [Literal]) -> Result<Self, DatalogError> {
        let positives: Vec<&Atom> = body
            .iter()
            .filter_map(|l| match l {
                Literal::Pos(a) => Some(a),
                _ => None,
            })
            .collect();
        let mut filters = vec![Vec::new(); positives.len() + 1];
        for lit in body.iter().filter(|l| !matches!(l, Literal::Pos(_))) {
            let mut slot = 0;
            for v in lit.vars() {
                let bound_at = positives
                    .iter()
                    .position(|a| a.vars().any(|w| w == v))
                    .ok_or_else(|| DatalogError::UnboundConstraint(v.to_string()))?;
                slot = slot.max(bound_at + 1);
            }
            filters[slot].push(lit);
        }
        Ok(Plan { positives, filters })
    }
}

fn resolve(t: &Term, theta: &Substitution) -> Result<Constant, DatalogError> {
    match t {
        Term::Const(c) => Ok(c.clone()),
        Term::Var(v) => theta
            .get(v)
            .cloned()
            .ok_or_else(|| DatalogError::UnboundConstraint(v.clone())),
    }
}

fn filter_holds(lit: &Literal, theta: &Substitution, model: &Model) -> Result<bool, DatalogError> {
    match lit {
        Literal::Pos(_) => unreachable!("positive atoms are joined, not filtered"),
        Literal::Neg(a) => {
            let args = a
                .args
                .iter()
                .map(|t| resolve(t, theta))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(!model.contains(&Fact::new(a.predicate.clone(), args)))
        }
        Literal::Cmp(c) => {
            Ok(c.op.holds(&resolve(&c.lhs, theta)?, &resolve(&c.rhs, theta)?))
        }
    }
}

/// Extends `theta` so that `atom` matches `fact`; returns the newly bound
/// variables, or `None` (with `theta` restored) on mismatch.
fn unify(atom: &Atom, fact: &Fact, theta: &mut Substitution) -> Option<Vec<String>> {
    if atom.args.len() != fact.args.len() {
        return None;
    }
    let mut bound = Vec::new();
    for (t, c) in atom.args.iter().zip(&fact.args) {
        let ok = match t {
            Term::Const(k) => k == c,
            Term::Var(v) => match theta.get(v) {
                Some(k) => k == c,
                None => {
                    theta.insert(v.clone(), c.clone());
                    bound.push(v.clone());
                    true
                }
            },
        };
        if !ok {
            for v in &bound {
                theta.remove(v);
            }
            return None;
        }
    }
    Some(bound)
}

/// Depth-first join. `windows[i]` restricts which model positions the i-th
/// positive atom may match. `emit` returns `true` to stop the search.
fn search(
    plan: &Plan<'_>,
    depth: usize,
    windows: &[Range<usize>],
    model: &Model,
    theta: &mut Substitution,
    emit: &mut dyn FnMut(&Substitution) -> bool,
) -> Result<bool, DatalogError> {
    for lit in &plan.filters[depth] {
        if !filter_holds(lit, theta, model)? {
            return Ok(false);
        }
    }
    if depth == plan.positives.len() {
        return Ok(emit(theta));
    }
    let atom = plan.positives[depth];
    for fact in model.scan(&atom.predicate, windows[depth].clone()) {
        if let Some(bound) = unify(atom, fact, theta) {
            let stop = search(plan, depth + 1, windows, model, theta, emit)?;
            for v in &bound {
                theta.remove(v);
            }
            if stop {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn instantiate_head(head: &Atom, theta: &Substitution) -> Result<Fact, DatalogError> {
    let args = head
        .args
        .iter()
        .map(|t| resolve(t, theta))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Fact::new(head.predicate.clone(), args))
}

/// Computes the least model of `ctx`, stratum by stratum.
pub fn evaluate(ctx: &Context) -> Result<Model, DatalogError> {
    let rules = ctx.rules();
    let strata = stratify_indices(rules)?;
    let plans = rules
        .iter()
        .map(|r| Plan::new(r.body()))
        .collect::<Result<Vec<_>, _>>()?;

    let mut model = Model::default();
    for f in ctx.facts() {
        model.push(f.clone());
    }

    for stratum in strata {
        let derived_here = |pred: &str| stratum.iter().any(|&r| rules[r].head().predicate == pred);

        // First round sees everything; later rounds need at least one atom
        // of this stratum to match a fact from the previous round's delta.
        let mut delta = 0..model.len();
        let mut first = true;
        while first || !delta.is_empty() {
            let mut found = Vec::new();
            for &r in &stratum {
                let plan = &plans[r];
                let head = rules[r].head();
                let n = plan.positives.len();
                let variants: Vec<Vec<Range<usize>>> = if first {
                    vec![vec![0..delta.end; n]]
                } else {
                    (0..n)
                        .filter(|&j| derived_here(&plan.positives[j].predicate))
                        .map(|j| {
                            (0..n)
                                .map(|k| match k.cmp(&j) {
                                    std::cmp::Ordering::Less => 0..delta.start,
                                    std::cmp::Ordering::Equal => delta.clone(),
                                    std::cmp::Ordering::Greater => 0..delta.end,
                                })
                                .collect()
                        })
                        .collect()
                };
                for windows in variants {
                    let mut theta = Substitution::new();
                    let mut err = None;
                    search(plan, 0, &windows, &model, &mut theta, &mut |t| {
                        match instantiate_head(head, t) {
                            Ok(f) => found.push(f),
                            Err(e) => err = Some(e),
                        }
                        false
                    })?;
                    if let Some(e) = err {
                        return Err(e);
                    }
                }
            }
            let start = model.len();
            for f in found {
                model.push(f);
            }
            delta = start..model.len();
            first = false;
        }
    }
    Ok(model)
}

/// `C ⊨ G with θ`: the first substitution, in model order, that grounds
/// `goal` into the least model of `ctx`. Only the goal's variables are bound.
pub fn solve(ctx: &Context, goal: &Goal) -> Result<Option<Substitution>, DatalogError> {
    if goal.is_empty() {
        return Ok(Some(Substitution::new()));
    }
    let model = evaluate(ctx)?;
    solve_in(&model, goal)
}

pub(crate) fn solve_in(model: &Model, goal: &Goal) -> Result<Option<Substitution>, DatalogError> {
    let plan = Plan::new(goal.literals())?;
    let windows = vec![0..model.len(); plan.positives.len()];
    let mut answer = None;
    let mut theta = Substitution::new();
    search(&plan, 0, &windows, model, &mut theta, &mut |t| {
        answer = Some(t.clone());
        true
    })?;
    Ok(answer)
}
