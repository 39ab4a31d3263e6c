//! Capture-avoiding substitution, fresh names and the closedness check.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ast::{Case, Checkpoint, Const, Expr, Value};
use crate::datalog::Substitution;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FreeVarError {
    #[error("free variable `{0}`")]
    Var(String),
    #[error("goal variable `?{0}` is not bound by an enclosing goal")]
    GoalVar(String),
}

/// `hint`, or `hint` followed by the smallest positive suffix not in `avoid`.
pub fn fresh_var(hint: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(hint) {
        return hint.to_string();
    }
    (1u64..)
        .map(|i| format!("{hint}{i}"))
        .find(|c| !avoid.contains(c))
        .expect("suffixes are unbounded")
}

/// Free ordinary variables of `e`.
pub fn free_vars(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_free(e, &mut Vec::new(), &mut out);
    out
}

fn collect_free(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    let under =
        |binders: &[&str], body: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>| {
            let n = bound.len();
            bound.extend(binders.iter().map(|b| b.to_string()));
            collect_free(body, bound, out);
            bound.truncate(n);
        };
    match e {
        Expr::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Expr::Value(Value::Fun { name, param, body }) => under(&[name, param], body, bound, out),
        Expr::Value(Value::Variation { param, cases }) => {
            for c in cases {
                under(&[param], &c.body, bound, out);
            }
        }
        Expr::Value(_) | Expr::Param(_) | Expr::GoalVar(_) | Expr::FactPattern(_) => {}
        Expr::Let {
            var,
            bound: b,
            body,
        } => {
            collect_free(b, bound, out);
            under(&[var], body, bound, out);
        }
        _ => for_children(e, |c| collect_free(c, bound, out)),
    }
}

/// Applies `f` to the immediate sub-expressions of a non-binding form.
fn for_children(e: &Expr, mut f: impl FnMut(&Expr)) {
    match e {
        Expr::App(a, b) | Expr::Append(a, b) | Expr::VaApp(a, b) => {
            f(a);
            f(b);
        }
        Expr::If(a, b, c) => {
            f(a);
            f(b);
            f(c);
        }
        Expr::Dlet { bound, body, .. } => {
            f(bound);
            f(body);
        }
        Expr::Tell(a) | Expr::Retract(a) | Expr::Overlined { body: a, .. } => f(a),
        Expr::Checkpointed(a, ann) => {
            f(a);
            f(&ann.resume);
        }
        Expr::Value(_)
        | Expr::Var(_)
        | Expr::Param(_)
        | Expr::GoalVar(_)
        | Expr::FactPattern(_)
        | Expr::Let { .. } => unreachable!("handled by the caller"),
    }
}

/// Every ordinary variable name in `e`, bound or free, binders included.
pub fn all_names(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    e.walk(&mut |sub| match sub {
        Expr::Var(x) => {
            out.insert(x.clone());
        }
        Expr::Let { var, .. } => {
            out.insert(var.clone());
        }
        Expr::Value(Value::Fun { name, param, .. }) => {
            out.insert(name.clone());
            out.insert(param.clone());
        }
        Expr::Value(Value::Variation { param, .. }) => {
            out.insert(param.clone());
        }
        _ => {}
    });
    out
}

/// Renames binder `y` to a name that cannot capture anything in `s`.
fn rename_binder(
    y: &str,
    sibling: Option<&str>,
    body: &Expr,
    x: &str,
    s: &Expr,
    s_free: &BTreeSet<String>,
) -> (String, Expr) {
    let mut avoid = all_names(body);
    avoid.extend(sibling.map(str::to_string));
    avoid.extend(s_free.iter().cloned());
    avoid.extend(all_names(s));
    avoid.insert(x.to_string());
    let z = fresh_var(y, &avoid);
    let body = subst_expr(body, y, &Expr::Var(z.clone()));
    (z, body)
}

/// `e{s/x}`, renaming binders of `e` that would capture free variables of `s`.
pub fn subst_expr(e: &Expr, x: &str, s: &Expr) -> Expr {
    let s_free = free_vars(s);
    go(e, x, s, &s_free)
}

fn go(e: &Expr, x: &str, s: &Expr, fv: &BTreeSet<String>) -> Expr {
    let rec = |e: &Expr| go(e, x, s, fv);
    // Substitute under one binder, renaming it first if it would capture.
    let under = |y: &str, body: &Expr| -> (String, Expr) {
        if fv.contains(y) {
            let (z, body) = rename_binder(y, None, body, x, s, fv);
            let body = go(&body, x, s, fv);
            (z, body)
        } else {
            (y.to_string(), go(body, x, s, fv))
        }
    };
    match e {
        Expr::Var(y) if y == x => s.clone(),
        Expr::Var(_) | Expr::Param(_) | Expr::GoalVar(_) | Expr::FactPattern(_) => e.clone(),
        Expr::Value(v) => match v {
            Value::Const(_) | Value::Fact(_) | Value::Prim(_) => e.clone(),
            Value::Fun { name, param, body } => {
                if name == x || param == x {
                    return e.clone();
                }
                let (name2, body) = if fv.contains(name) {
                    rename_binder(name, Some(param), body, x, s, fv)
                } else {
                    (name.clone(), (**body).clone())
                };
                let (param2, body) = if fv.contains(param) {
                    let (z, body) = rename_binder(param, Some(&name2), &body, x, s, fv);
                    (z, go(&body, x, s, fv))
                } else {
                    (param.clone(), go(&body, x, s, fv))
                };
                Expr::fun(name2, param2, body)
            }
            Value::Variation { param, cases } => {
                if param == x {
                    return e.clone();
                }
                let needs_rename = fv.contains(param);
                let param2 = if needs_rename {
                    let mut avoid: BTreeSet<String> =
                        cases.iter().flat_map(|c| all_names(&c.body)).collect();
                    avoid.extend(fv.iter().cloned());
                    avoid.extend(all_names(s));
                    avoid.insert(x.to_string());
                    fresh_var(param, &avoid)
                } else {
                    param.clone()
                };
                let cases = cases
                    .iter()
                    .map(|c| {
                        let body = if needs_rename {
                            subst_expr(&c.body, param, &Expr::Var(param2.clone()))
                        } else {
                            c.body.clone()
                        };
                        Case::new(c.goal.clone(), go(&body, x, s, fv))
                    })
                    .collect();
                Expr::variation(param2, cases)
            }
        },
        Expr::Let { var, bound, body } => {
            let bound = rec(bound);
            if var == x {
                return Expr::let_(var.clone(), bound, (**body).clone());
            }
            let (var2, body) = under(var, body);
            Expr::let_(var2, bound, body)
        }
        Expr::App(a, b) => Expr::app(rec(a), rec(b)),
        Expr::Append(a, b) => Expr::append(rec(a), rec(b)),
        Expr::VaApp(a, b) => Expr::va_app(rec(a), rec(b)),
        Expr::If(a, b, c) => Expr::if_(rec(a), rec(b), rec(c)),
        Expr::Tell(a) => Expr::tell(rec(a)),
        Expr::Retract(a) => Expr::retract(rec(a)),
        Expr::Dlet {
            param,
            bound,
            goal,
            body,
        } => Expr::dlet(param.clone(), rec(bound), goal.clone(), rec(body)),
        Expr::Overlined { param, body } => Expr::Overlined {
            param: param.clone(),
            body: Box::new(rec(body)),
        },
        Expr::Checkpointed(inner, ann) => Expr::Checkpointed(
            Box::new(rec(inner)),
            Box::new(Checkpoint {
                goal: ann.goal.clone(),
                env: ann.env.clone(),
                resume: rec(&ann.resume),
            }),
        ),
    }
}

/// `e{v/x}` for a value `v`.
pub fn substitute(e: &Expr, x: &str, v: &Value) -> Expr {
    subst_expr(e, x, &Expr::Value(v.clone()))
}

/// `e θ`: replaces goal variables bound by `theta`. Inner goals that bind
/// the same variable shadow the outer binding.
pub fn instantiate(e: &Expr, theta: &Substitution) -> Expr {
    if theta.is_empty() {
        return e.clone();
    }
    let rec = |e: &Expr| instantiate(e, theta);
    let shadowed = |vars: Vec<String>| {
        let mut inner = theta.clone();
        inner.retain(|k| !vars.iter().any(|v| v == k));
        inner
    };
    match e {
        Expr::GoalVar(v) => match theta.get(v) {
            Some(c) => Expr::Value(Value::Const(Const::from(c.clone()))),
            None => e.clone(),
        },
        Expr::FactPattern(atom) => {
            let atom = atom.apply(theta);
            match atom.to_fact() {
                Some(f) => Expr::fact(f),
                None => Expr::FactPattern(atom),
            }
        }
        Expr::Var(_) | Expr::Param(_) => e.clone(),
        Expr::Value(v) => match v {
            Value::Const(_) | Value::Fact(_) | Value::Prim(_) => e.clone(),
            Value::Fun { name, param, body } => Expr::fun(name.clone(), param.clone(), rec(body)),
            Value::Variation { param, cases } => Expr::variation(
                param.clone(),
                cases
                    .iter()
                    .map(|c| {
                        Case::new(
                            c.goal.clone(),
                            instantiate(&c.body, &shadowed(c.goal.vars())),
                        )
                    })
                    .collect(),
            ),
        },
        Expr::Let { var, bound, body } => Expr::let_(var.clone(), rec(bound), rec(body)),
        Expr::Dlet {
            param,
            bound,
            goal,
            body,
        } => Expr::dlet(
            param.clone(),
            instantiate(bound, &shadowed(goal.vars())),
            goal.clone(),
            rec(body),
        ),
        Expr::App(a, b) => Expr::app(rec(a), rec(b)),
        Expr::Append(a, b) => Expr::append(rec(a), rec(b)),
        Expr::VaApp(a, b) => Expr::va_app(rec(a), rec(b)),
        Expr::If(a, b, c) => Expr::if_(rec(a), rec(b), rec(c)),
        Expr::Tell(a) => Expr::tell(rec(a)),
        Expr::Retract(a) => Expr::retract(rec(a)),
        Expr::Overlined { param, body } => Expr::Overlined {
            param: param.clone(),
            body: Box::new(rec(body)),
        },
        Expr::Checkpointed(inner, ann) => Expr::Checkpointed(Box::new(rec(inner)), ann.clone()),
    }
}

/// Checks that `e` has no free ordinary or goal variables and returns the
/// parameters it uses outside the scope of a `dlet` binding them.
pub fn closed_check(e: &Expr) -> Result<BTreeSet<String>, FreeVarError> {
    if let Some(x) = free_vars(e).into_iter().next() {
        return Err(FreeVarError::Var(x));
    }
    let mut params = BTreeSet::new();
    check_scoped(e, &mut Vec::new(), &mut Vec::new(), &mut params)?;
    Ok(params)
}

fn check_scoped(
    e: &Expr,
    goal_vars: &mut Vec<String>,
    dlet_params: &mut Vec<String>,
    free_params: &mut BTreeSet<String>,
) -> Result<(), FreeVarError> {
    let unbound_goal_var = |v: &str, goal_vars: &Vec<String>| {
        if goal_vars.iter().any(|g| g == v) {
            Ok(())
        } else {
            Err(FreeVarError::GoalVar(v.to_string()))
        }
    };
    match e {
        Expr::GoalVar(v) => unbound_goal_var(v, goal_vars),
        Expr::FactPattern(a) => a.vars().try_for_each(|v| unbound_goal_var(v, goal_vars)),
        Expr::Param(p) => {
            if !dlet_params.contains(p) {
                free_params.insert(p.clone());
            }
            Ok(())
        }
        Expr::Var(_) => Ok(()),
        Expr::Value(v) => match v {
            Value::Const(_) | Value::Fact(_) | Value::Prim(_) => Ok(()),
            Value::Fun { body, .. } => check_scoped(body, goal_vars, dlet_params, free_params),
            Value::Variation { cases, .. } => {
                for c in cases {
                    let n = goal_vars.len();
                    goal_vars.extend(c.goal.vars());
                    let r = check_scoped(&c.body, goal_vars, dlet_params, free_params);
                    goal_vars.truncate(n);
                    r?;
                }
                Ok(())
            }
        },
        Expr::Dlet {
            param,
            bound,
            goal,
            body,
        } => {
            let n = goal_vars.len();
            goal_vars.extend(goal.vars());
            let r = check_scoped(bound, goal_vars, dlet_params, free_params);
            goal_vars.truncate(n);
            r?;
            dlet_params.push(param.clone());
            let r = check_scoped(body, goal_vars, dlet_params, free_params);
            dlet_params.pop();
            r
        }
        Expr::Overlined { param, body } => {
            dlet_params.push(param.clone());
            let r = check_scoped(body, goal_vars, dlet_params, free_params);
            dlet_params.pop();
            r
        }
        Expr::Let { bound, body, .. } => {
            check_scoped(bound, goal_vars, dlet_params, free_params)?;
            check_scoped(body, goal_vars, dlet_params, free_params)
        }
        _ => {
            let mut r = Ok(());
            for_children(e, |c| {
                if r.is_ok() {
                    r = check_scoped(c, goal_vars, dlet_params, free_params);
                }
            });
            r
        }
    }
}
