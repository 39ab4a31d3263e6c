//! Concrete syntax for contexts: `head :- body.` clauses and `head.` facts.
//! `←` and `<-` are accepted for `:-`; variables are written `?x`.

use super::{Atom, CmpOp, Constant, Constraint, DatalogError, Fact, Goal, Literal, Rule, Term};
use crate::lexer::{Cursor, SyntaxError, Tok};

/// Parses a context source into its facts and rules, in source order.
pub fn parse_datalog(src: &str) -> Result<(Vec<Fact>, Vec<Rule>), DatalogError> {
    let mut cur = Cursor::new(src)?;
    let mut facts = Vec::new();
    let mut rules = Vec::new();
    while !cur.at_eof() {
        let head = parse_atom_at(&mut cur)?;
        let body = if cur.eat(&Tok::Gets) {
            parse_literals(&mut cur)?
        } else {
            Vec::new()
        };
        cur.expect(&Tok::Dot)?;
        if body.is_empty() {
            match head.to_fact() {
                Some(f) => facts.push(f),
                None => {
                    let v = head.vars().next().unwrap_or_default().to_string();
                    return Err(DatalogError::RangeRestriction(v));
                }
            }
        } else {
            rules.push(Rule::new(head, body)?);
        }
    }
    Ok((facts, rules))
}

/// Parses a standalone goal such as `user_age(?x), ?x < 10`.
pub fn parse_goal(src: &str) -> Result<Goal, DatalogError> {
    let mut cur = Cursor::new(src)?;
    let goal = parse_goal_at(&mut cur, |c| c.at_eof())?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of goal").into());
    }
    Ok(goal)
}

/// Parses a single ground fact such as `user_work(student)`.
pub fn parse_fact(src: &str) -> Result<Fact, DatalogError> {
    let mut cur = Cursor::new(src)?;
    let atom = parse_atom_at(&mut cur)?;
    cur.eat(&Tok::Dot);
    if !cur.at_eof() {
        return Err(cur.unexpected("end of fact").into());
    }
    atom.to_fact().ok_or_else(|| {
        DatalogError::RangeRestriction(atom.vars().next().unwrap_or_default().into())
    })
}

/// Parses a possibly empty goal; `at_end` recognises the token that
/// terminates it without consuming it.
pub(crate) fn parse_goal_at(
    cur: &mut Cursor,
    at_end: impl Fn(&Cursor) -> bool,
) -> Result<Goal, DatalogError> {
    if at_end(cur) {
        return Ok(Goal::empty());
    }
    Goal::new(parse_literals(cur)?)
}

fn parse_literals(cur: &mut Cursor) -> Result<Vec<Literal>, SyntaxError> {
    let mut lits = vec![parse_literal(cur)?];
    while cur.eat(&Tok::Comma) {
        lits.push(parse_literal(cur)?);
    }
    Ok(lits)
}

fn cmp_op(tok: &Tok) -> Option<CmpOp> {
    Some(match tok {
        Tok::Lt => CmpOp::Lt,
        Tok::Le => CmpOp::Le,
        Tok::Gt => CmpOp::Gt,
        Tok::Ge => CmpOp::Ge,
        Tok::Eq => CmpOp::Eq,
        Tok::Ne => CmpOp::Ne,
        _ => return None,
    })
}

fn parse_literal(cur: &mut Cursor) -> Result<Literal, SyntaxError> {
    if cur.eat_keyword("not") {
        return Ok(Literal::Neg(parse_atom_at(cur)?));
    }
    let is_constraint = match cur.peek() {
        Tok::QVar(_) | Tok::Int(_) | Tok::Sym(_) => true,
        Tok::Ident(_) => cmp_op(cur.peek_at(1)).is_some(),
        _ => false,
    };
    if !is_constraint {
        return Ok(Literal::Pos(parse_atom_at(cur)?));
    }
    let lhs = parse_term(cur)?;
    let op = cmp_op(cur.peek()).ok_or_else(|| cur.unexpected("a comparison operator"))?;
    cur.bump();
    let rhs = parse_term(cur)?;
    Ok(Literal::Cmp(Constraint { op, lhs, rhs }))
}

pub(crate) fn parse_atom_at(cur: &mut Cursor) -> Result<Atom, SyntaxError> {
    let predicate = cur.expect_ident("a predicate name")?;
    let mut args = Vec::new();
    if cur.eat(&Tok::LParen) && !cur.eat(&Tok::RParen) {
        args.push(parse_term(cur)?);
        while cur.eat(&Tok::Comma) {
            args.push(parse_term(cur)?);
        }
        cur.expect(&Tok::RParen)?;
    }
    Ok(Atom::new(predicate, args))
}

fn parse_term(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    let term = match cur.peek() {
        Tok::QVar(v) => Term::Var(v.clone()),
        Tok::Int(n) => Term::Const(Constant::Int(*n)),
        Tok::Ident(s) | Tok::Sym(s) => Term::Const(Constant::Sym(s.clone())),
        _ => return Err(cur.unexpected("a term")),
    };
    cur.bump();
    Ok(term)
}
