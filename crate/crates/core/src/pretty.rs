//! Printing in the concrete syntax accepted by [`crate::parser`].
//!
//! `let`, `dlet`, `if` and `fun` extend as far right as possible, so they
//! are printed bare only in tail position and parenthesised elsewhere.

use std::fmt::{self, Write};

use crate::ast::{Case, Checkpoint, Const, Expr, PEnv, Prim, Value};
use crate::datalog::Goal;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    /// Only primaries print bare.
    Arg,
    /// Applications print bare.
    Operand,
    /// Unions print bare.
    Inner,
    /// Everything prints bare.
    Tail,
}

fn write_const(f: &mut fmt::Formatter<'_>, c: &Const) -> fmt::Result {
    match c {
        Const::Unit => f.write_str("()"),
        Const::Bool(b) => write!(f, "{b}"),
        Const::Int(n) => write!(f, "{n}"),
        Const::Sym(s) => write!(f, "'{s}"),
        Const::Str(s) => {
            f.write_char('"')?;
            for ch in s.chars() {
                match ch {
                    '"' => f.write_str("\\\"")?,
                    '\\' => f.write_str("\\\\")?,
                    '\n' => f.write_str("\\n")?,
                    '\t' => f.write_str("\\t")?,
                    c => f.write_char(c)?,
                }
            }
            f.write_char('"')
        }
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_const(f, self)
    }
}

fn write_goal_head(f: &mut fmt::Formatter<'_>, goal: &Goal) -> fmt::Result {
    if goal.is_empty() {
        f.write_str("<-")
    } else {
        write!(f, "<- {goal}")
    }
}

fn write_cases(f: &mut fmt::Formatter<'_>, cases: &[Case]) -> fmt::Result {
    for (i, case) in cases.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write_goal_head(f, &case.goal)?;
        f.write_str(". ")?;
        write_expr(f, &case.body, Slot::Tail)?;
    }
    Ok(())
}

fn open<F>(f: &mut fmt::Formatter<'_>, slot: Slot, needs: Slot, body: F) -> fmt::Result
where
    F: FnOnce(&mut fmt::Formatter<'_>) -> fmt::Result,
{
    if slot < needs {
        f.write_str("(")?;
        body(f)?;
        f.write_str(")")
    } else {
        body(f)
    }
}

fn write_prim(f: &mut fmt::Formatter<'_>, p: &Prim, slot: Slot) -> fmt::Result {
    if p.args.is_empty() {
        return f.write_str(&p.name);
    }
    open(f, slot, Slot::Operand, |f| {
        f.write_str(&p.name)?;
        for a in &p.args {
            f.write_str(" ")?;
            write_value(f, a, Slot::Arg)?;
        }
        Ok(())
    })
}

fn write_value(f: &mut fmt::Formatter<'_>, v: &Value, slot: Slot) -> fmt::Result {
    match v {
        Value::Const(c) => write_const(f, c),
        Value::Fact(fact) => write!(f, "@{fact}"),
        Value::Prim(p) => write_prim(f, p, slot),
        Value::Fun { name, param, body } => open(f, slot, Slot::Tail, |f| {
            write!(f, "fun {name}({param}) = ")?;
            write_expr(f, body, Slot::Tail)
        }),
        Value::Variation { param, cases } => {
            write!(f, "({param}){{")?;
            write_cases(f, cases)?;
            f.write_str("}")
        }
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, slot: Slot) -> fmt::Result {
    match e {
        Expr::Value(v) => write_value(f, v, slot),
        Expr::Var(x) => f.write_str(x),
        Expr::Param(x) => write!(f, "~{x}"),
        Expr::GoalVar(x) => write!(f, "?{x}"),
        Expr::FactPattern(a) => write!(f, "@{a}"),
        Expr::App(head, arg) => open(f, slot, Slot::Operand, |f| {
            write_expr(f, head, Slot::Operand)?;
            f.write_str(" ")?;
            write_expr(f, arg, Slot::Arg)
        }),
        Expr::Let { var, bound, body } => open(f, slot, Slot::Tail, |f| {
            write!(f, "let {var} = ")?;
            write_expr(f, bound, Slot::Inner)?;
            f.write_str(" in ")?;
            write_expr(f, body, Slot::Tail)
        }),
        Expr::Dlet {
            param,
            bound,
            goal,
            body,
        } => open(f, slot, Slot::Tail, |f| {
            write!(f, "dlet ~{param} = ")?;
            write_expr(f, bound, Slot::Inner)?;
            if goal.is_empty() {
                f.write_str(" when in ")?;
            } else {
                write!(f, " when {goal} in ")?;
            }
            write_expr(f, body, Slot::Tail)
        }),
        Expr::If(c, t, e) => open(f, slot, Slot::Tail, |f| {
            f.write_str("if ")?;
            write_expr(f, c, Slot::Inner)?;
            f.write_str(" then ")?;
            write_expr(f, t, Slot::Inner)?;
            f.write_str(" else ")?;
            write_expr(f, e, Slot::Tail)
        }),
        Expr::Tell(e) => {
            f.write_str("tell(")?;
            write_expr(f, e, Slot::Tail)?;
            f.write_str(")")
        }
        Expr::Retract(e) => {
            f.write_str("retract(")?;
            write_expr(f, e, Slot::Tail)?;
            f.write_str(")")
        }
        Expr::Append(a, b) => open(f, slot, Slot::Inner, |f| {
            write_expr(f, a, Slot::Inner)?;
            f.write_str(" ∪ ")?;
            write_expr(f, b, Slot::Operand)
        }),
        Expr::VaApp(bv, arg) => match bv.as_ref() {
            Expr::Var(x) => {
                write!(f, "#{x}(")?;
                write_expr(f, arg, Slot::Tail)?;
                f.write_str(")")
            }
            Expr::Param(x) => {
                write!(f, "#~{x}(")?;
                write_expr(f, arg, Slot::Tail)?;
                f.write_str(")")
            }
            _ => {
                f.write_str("#(")?;
                write_expr(f, bv, Slot::Tail)?;
                f.write_str(", ")?;
                write_expr(f, arg, Slot::Tail)?;
                f.write_str(")")
            }
        },
        Expr::Checkpointed(inner, ann) => {
            f.write_str("$ckpt[")?;
            write_goal_head(f, &ann.goal)?;
            f.write_str("](")?;
            write_expr(f, inner, Slot::Tail)?;
            f.write_str(")")
        }
        Expr::Overlined { param, body } => {
            write!(f, "$over[~{param}](")?;
            write_expr(f, body, Slot::Tail)?;
            f.write_str(")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, Slot::Tail)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_value(f, self, Slot::Tail)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_cases(f, std::slice::from_ref(self))
    }
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        write_goal_head(f, &self.goal)?;
        write!(f, "; {}; {})", self.env, self.resume)
    }
}

impl fmt::Display for PEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (param, cases)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "~{param} -> ")?;
            write_cases(f, cases)?;
        }
        f.write_str("}")
    }
}
