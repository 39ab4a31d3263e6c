//! Recursive-descent parser for programs (`.cml`) and handler tables (`.hdl`).
//!
//! ```text
//! program  := { "extern" ID "/" INT "=" literal ";" } expr
//! expr     := "fun" ID "(" ID ")" "=" expr [ "in" expr ]
//!           | "let" ID "=" expr "in" expr
//!           | "dlet" ~ID "=" expr "when" goal "in" expr
//!           | "if" expr "then" expr "else" expr
//!           | union
//! union    := app { ("∪" | "++") app }
//! app      := primary { primary }
//! primary  := INT | STRING | 'SYM | "true" | "false" | "()" | ID | ~ID | ?ID
//!           | "(" ID ")" "{" cases "}" | "(" expr ")"
//!           | "tell" "(" expr ")" | "retract" "(" expr ")"
//!           | "#" ID "(" expr ")" | "#" ~ID "(" expr ")" | "#" "(" expr "," expr ")"
//!           | "@" atom
//! cases    := "<-" goal "." expr { "," "<-" goal "." expr }
//! handlers := { "on" ID "=>" expr }
//! ```

use thiserror::Error;

use crate::ast::{Case, Const, Expr, HandlerTable, Value};
use crate::datalog::{parse_atom_at, parse_goal_at, DatalogError, Goal};
use crate::lexer::{Cursor, SyntaxError, Tok};

const KEYWORDS: &[&str] = &[
    "fun", "let", "dlet", "in", "when", "if", "then", "else", "tell", "retract", "true", "false",
    "not", "extern", "on",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{line}:{column}: `${form}` is an interpreter-internal form and cannot be written in source")]
    AuxForm {
        line: usize,
        column: usize,
        form: String,
    },
    #[error("{line}:{column}: {source}")]
    Goal {
        line: usize,
        column: usize,
        source: DatalogError,
    },
}

impl ParseError {
    /// The 1-based source position of the failure.
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax(e) => (e.line, e.column),
            ParseError::AuxForm { line, column, .. } | ParseError::Goal { line, column, .. } => {
                (*line, *column)
            }
        }
    }
}

/// An `extern NAME/ARITY = literal;` declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extern {
    pub name: String,
    pub arity: usize,
    pub result: Const,
}

/// A parsed `.cml` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Source {
    pub externs: Vec<Extern>,
    pub expr: Expr,
}

/// Parses a single expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a program file: extern declarations followed by the main expression.
pub fn parse_program(src: &str) -> Result<Source, ParseError> {
    let mut p = Parser::new(src)?;
    let mut externs = Vec::new();
    while p.cur.eat_keyword("extern") {
        let name = p.ident("a primitive name")?;
        p.cur.expect(&Tok::Slash)?;
        let arity = match p.cur.peek() {
            Tok::Int(n) if *n >= 1 => *n as usize,
            _ => return Err(p.cur.unexpected("a positive arity").into()),
        };
        p.cur.bump();
        p.cur.expect(&Tok::Eq)?;
        let result = p.literal()?;
        p.cur.expect(&Tok::Semi)?;
        externs.push(Extern {
            name,
            arity,
            result,
        });
    }
    let expr = p.expr()?;
    p.finish()?;
    Ok(Source { externs, expr })
}

/// Parses a handler file of `on EVENT => expr` entries.
pub fn parse_handlers(src: &str) -> Result<HandlerTable, ParseError> {
    let mut p = Parser::new(src)?;
    let mut table = HandlerTable::new();
    while !p.cur.at_eof() {
        p.cur.expect_keyword("on")?;
        let at = p.cur.token().clone();
        let event = p.ident("an event name")?;
        p.cur.expect(&Tok::Arrow)?;
        let body = p.expr()?;
        if table.insert(event.clone(), body).is_some() {
            return Err(SyntaxError::new(
                at.line,
                at.column,
                format!("duplicate handler for `{event}`"),
            )
            .into());
        }
    }
    Ok(table)
}

struct Parser {
    cur: Cursor,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            cur: Cursor::new(src)?,
        })
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.cur.at_eof() {
            Ok(())
        } else {
            Err(self.cur.unexpected("end of input").into())
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.cur.peek() {
            Tok::Ident(s) if !is_keyword(s) => Ok(self.cur.expect_ident(what)?),
            _ => Err(self.cur.unexpected(what).into()),
        }
    }

    fn param(&mut self) -> Result<String, ParseError> {
        match self.cur.bump() {
            Tok::Param(x) => Ok(x),
            _ => unreachable!("caller checked for a parameter token"),
        }
    }

    fn goal(&mut self, at_end: impl Fn(&Cursor) -> bool) -> Result<Goal, ParseError> {
        let (line, column) = (self.cur.token().line, self.cur.token().column);
        parse_goal_at(&mut self.cur, at_end).map_err(|e| match e {
            DatalogError::Syntax(s) => ParseError::Syntax(s),
            source => ParseError::Goal {
                line,
                column,
                source,
            },
        })
    }

    fn literal(&mut self) -> Result<Const, ParseError> {
        let c = match self.cur.peek().clone() {
            Tok::Int(n) => Const::Int(n),
            Tok::Str(s) => Const::Str(s),
            Tok::Sym(s) => Const::Sym(s),
            Tok::Ident(s) if s == "true" => Const::Bool(true),
            Tok::Ident(s) if s == "false" => Const::Bool(false),
            Tok::LParen if *self.cur.peek_at(1) == Tok::RParen => {
                self.cur.bump();
                Const::Unit
            }
            _ => return Err(self.cur.unexpected("a literal").into()),
        };
        self.cur.bump();
        Ok(c)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if self.cur.eat_keyword("fun") {
            let name = self.ident("a function name")?;
            self.cur.expect(&Tok::LParen)?;
            let param = self.ident("a parameter name")?;
            self.cur.expect(&Tok::RParen)?;
            self.cur.expect(&Tok::Eq)?;
            let body = self.expr()?;
            let fun = Expr::fun(name.clone(), param, body);
            return if self.cur.eat_keyword("in") {
                Ok(Expr::let_(name, fun, self.expr()?))
            } else {
                Ok(fun)
            };
        }
        if self.cur.eat_keyword("let") {
            let var = self.ident("a variable name")?;
            self.cur.expect(&Tok::Eq)?;
            let bound = self.expr()?;
            self.cur.expect_keyword("in")?;
            return Ok(Expr::let_(var, bound, self.expr()?));
        }
        if self.cur.eat_keyword("dlet") {
            if !matches!(self.cur.peek(), Tok::Param(_)) {
                return Err(self.cur.unexpected("a parameter `~name`").into());
            }
            let param = self.param()?;
            self.cur.expect(&Tok::Eq)?;
            let bound = self.expr()?;
            self.cur.expect_keyword("when")?;
            let goal = self.goal(|c| c.is_keyword("in"))?;
            self.cur.expect_keyword("in")?;
            return Ok(Expr::dlet(param, bound, goal, self.expr()?));
        }
        if self.cur.eat_keyword("if") {
            let c = self.expr()?;
            self.cur.expect_keyword("then")?;
            let t = self.expr()?;
            self.cur.expect_keyword("else")?;
            return Ok(Expr::if_(c, t, self.expr()?));
        }
        self.union()
    }

    fn union(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.app()?;
        while self.cur.eat(&Tok::Union) {
            lhs = Expr::append(lhs, self.app()?);
        }
        Ok(lhs)
    }

    fn app(&mut self) -> Result<Expr, ParseError> {
        let mut head = self.primary()?;
        while self.starts_primary() {
            head = Expr::app(head, self.primary()?);
        }
        Ok(head)
    }

    fn starts_primary(&self) -> bool {
        match self.cur.peek() {
            Tok::Ident(s) => {
                !is_keyword(s) || matches!(s.as_str(), "true" | "false" | "tell" | "retract")
            }
            Tok::Int(_)
            | Tok::Str(_)
            | Tok::Sym(_)
            | Tok::QVar(_)
            | Tok::Param(_)
            | Tok::Aux(_)
            | Tok::LParen
            | Tok::Hash
            | Tok::At => true,
            _ => false,
        }
    }

    fn parenthesised(&mut self) -> Result<Expr, ParseError> {
        self.cur.expect(&Tok::LParen)?;
        let e = self.expr()?;
        self.cur.expect(&Tok::RParen)?;
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.cur.token().clone();
        match tok.tok {
            Tok::Int(_) | Tok::Str(_) | Tok::Sym(_) => {
                Ok(Expr::Value(Value::Const(self.literal()?)))
            }
            Tok::QVar(x) => {
                self.cur.bump();
                Ok(Expr::GoalVar(x))
            }
            Tok::Param(_) => Ok(Expr::Param(self.param()?)),
            Tok::Aux(form) => Err(ParseError::AuxForm {
                line: tok.line,
                column: tok.column,
                form,
            }),
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => Ok(Expr::Value(Value::Const(self.literal()?))),
                "tell" | "retract" => {
                    self.cur.bump();
                    let e = self.parenthesised()?;
                    Ok(if s == "tell" {
                        Expr::tell(e)
                    } else {
                        Expr::retract(e)
                    })
                }
                _ if is_keyword(&s) => Err(self.cur.unexpected("an expression").into()),
                _ => {
                    self.cur.bump();
                    Ok(Expr::Var(s))
                }
            },
            Tok::At => {
                self.cur.bump();
                let atom = parse_atom_at(&mut self.cur)?;
                Ok(match atom.to_fact() {
                    Some(f) => Expr::fact(f),
                    None => Expr::FactPattern(atom),
                })
            }
            Tok::Hash => {
                self.cur.bump();
                match self.cur.peek().clone() {
                    Tok::LParen => {
                        self.cur.bump();
                        let bv = self.expr()?;
                        self.cur.expect(&Tok::Comma)?;
                        let arg = self.expr()?;
                        self.cur.expect(&Tok::RParen)?;
                        Ok(Expr::va_app(bv, arg))
                    }
                    Tok::Param(_) => {
                        let bv = Expr::Param(self.param()?);
                        Ok(Expr::va_app(bv, self.parenthesised()?))
                    }
                    _ => {
                        let bv = Expr::Var(self.ident("a variation after `#`")?);
                        Ok(Expr::va_app(bv, self.parenthesised()?))
                    }
                }
            }
            Tok::LParen => {
                if *self.cur.peek_at(1) == Tok::RParen {
                    return Ok(Expr::Value(Value::Const(self.literal()?)));
                }
                let is_variation = matches!(self.cur.peek_at(1), Tok::Ident(s) if !is_keyword(s))
                    && *self.cur.peek_at(2) == Tok::RParen
                    && *self.cur.peek_at(3) == Tok::LBrace;
                if !is_variation {
                    return self.parenthesised();
                }
                self.cur.bump();
                let param = self.ident("a variation parameter")?;
                self.cur.expect(&Tok::RParen)?;
                self.cur.expect(&Tok::LBrace)?;
                let mut cases = vec![self.case()?];
                while self.cur.eat(&Tok::Comma) {
                    cases.push(self.case()?);
                }
                self.cur.expect(&Tok::RBrace)?;
                Ok(Expr::variation(param, cases))
            }
            _ => Err(self.cur.unexpected("an expression").into()),
        }
    }

    fn case(&mut self) -> Result<Case, ParseError> {
        self.cur.expect(&Tok::Gets)?;
        let goal = self.goal(|c| *c.peek() == Tok::Dot)?;
        self.cur.expect(&Tok::Dot)?;
        Ok(Case::new(goal, self.expr()?))
    }
}
