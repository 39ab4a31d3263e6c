//! Tokenizer shared by the context, program, handler and scenario parsers.
//!
//! Comments are either `% ...` to end of line or ML-style `(* ... *)`.

use std::fmt;

use thiserror::Error;

/// A parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    /// `'name`
    Sym(String),
    /// `?name`
    QVar(String),
    /// `~name`
    Param(String),
    /// `$name`, reserved for the auxiliary forms the interpreter prints.
    Aux(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Semi,
    Hash,
    At,
    Slash,
    Eq,
    /// `=>`
    Arrow,
    /// `:=`
    Define,
    /// `<-`, `←` or `:-`
    Gets,
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
    /// `∪` or `++`
    Union,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Sym(s) => write!(f, "`'{s}`"),
            Tok::QVar(s) => write!(f, "`?{s}`"),
            Tok::Param(s) => write!(f, "`~{s}`"),
            Tok::Aux(s) => write!(f, "`${s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Hash => f.write_str("`#`"),
            Tok::At => f.write_str("`@`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Arrow => f.write_str("`=>`"),
            Tok::Define => f.write_str("`:=`"),
            Tok::Gets => f.write_str("`<-`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::Ne => f.write_str("`!=`"),
            Tok::Union => f.write_str("`∪`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Lexer<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn skip_trivia(&mut self) -> Result<(), SyntaxError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('(') => {
                    let mut probe = self.chars.clone();
                    probe.next();
                    if probe.peek() != Some(&'*') {
                        return Ok(());
                    }
                    let (line, column) = (self.line, self.column);
                    self.bump();
                    self.bump();
                    let mut depth = 1;
                    let mut prev = '\0';
                    while depth > 0 {
                        let Some(c) = self.bump() else {
                            return Err(SyntaxError::new(line, column, "unterminated comment"));
                        };
                        match (prev, c) {
                            ('(', '*') => {
                                depth += 1;
                                prev = '\0';
                                continue;
                            }
                            ('*', ')') => {
                                depth -= 1;
                                prev = '\0';
                                continue;
                            }
                            _ => {}
                        }
                        prev = c;
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn sigil_name(
        &mut self,
        sigil: char,
        line: usize,
        column: usize,
    ) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => Ok(self.ident()),
            _ => Err(SyntaxError::new(
                line,
                column,
                format!("expected a name after `{sigil}`"),
            )),
        }
    }

    fn next_token(&mut self) -> Result<Token, SyntaxError> {
        self.skip_trivia()?;
        let (line, column) = (self.line, self.column);
        let at = |tok| Ok(Token { tok, line, column });
        let Some(c) = self.peek() else {
            return at(Tok::Eof);
        };
        if c.is_alphabetic() || c == '_' {
            return at(Tok::Ident(self.ident()));
        }
        if c.is_ascii_digit() {
            return self.number(false, line, column);
        }
        self.bump();
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            ';' => Tok::Semi,
            '#' => Tok::Hash,
            '@' => Tok::At,
            '/' => Tok::Slash,
            '←' => Tok::Gets,
            '∪' => Tok::Union,
            '≠' => Tok::Ne,
            '≤' => Tok::Le,
            '≥' => Tok::Ge,
            '\'' => Tok::Sym(self.sigil_name('\'', line, column)?),
            '?' => Tok::QVar(self.sigil_name('?', line, column)?),
            '~' => Tok::Param(self.sigil_name('~', line, column)?),
            '$' => Tok::Aux(self.sigil_name('$', line, column)?),
            '=' => {
                if self.peek() == Some('>') {
                    self.bump();
                    Tok::Arrow
                } else {
                    Tok::Eq
                }
            }
            ':' => match self.bump() {
                Some('=') => Tok::Define,
                Some('-') => Tok::Gets,
                _ => return Err(SyntaxError::new(line, column, "expected `:=` or `:-`")),
            },
            '<' => match self.peek() {
                Some('-') => {
                    self.bump();
                    Tok::Gets
                }
                Some('=') => {
                    self.bump();
                    Tok::Le
                }
                Some('>') => {
                    self.bump();
                    Tok::Ne
                }
                _ => Tok::Lt,
            },
            '>' => {
                if self.peek() == Some('=') {
                    self.bump();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            '!' => {
                if self.bump() == Some('=') {
                    Tok::Ne
                } else {
                    return Err(SyntaxError::new(line, column, "expected `!=`"));
                }
            }
            '+' => {
                if self.bump() == Some('+') {
                    Tok::Union
                } else {
                    return Err(SyntaxError::new(line, column, "expected `++`"));
                }
            }
            '-' => {
                if self.peek().is_some_and(|d| d.is_ascii_digit()) {
                    return self.number(true, line, column);
                }
                return Err(SyntaxError::new(line, column, "unexpected `-`"));
            }
            '"' => Tok::Str(self.string(line, column)?),
            other => {
                return Err(SyntaxError::new(
                    line,
                    column,
                    format!("unexpected character `{other}`"),
                ))
            }
        };
        at(tok)
    }

    fn number(&mut self, negative: bool, line: usize, column: usize) -> Result<Token, SyntaxError> {
        let mut digits = String::new();
        if negative {
            digits.push('-');
        }
        while let Some(d) = self.peek().filter(|d| d.is_ascii_digit()) {
            digits.push(d);
            self.bump();
        }
        let n = digits.parse::<i64>().map_err(|_| {
            SyntaxError::new(line, column, format!("integer `{digits}` out of range"))
        })?;
        Ok(Token {
            tok: Tok::Int(n),
            line,
            column,
        })
    }

    fn string(&mut self, line: usize, column: usize) -> Result<String, SyntaxError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(SyntaxError::new(line, column, "unterminated string")),
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c @ ('"' | '\\')) => s.push(c),
                    _ => {
                        return Err(SyntaxError::new(
                            self.line,
                            self.column,
                            "bad escape in string",
                        ))
                    }
                },
                Some(c) => s.push(c),
            }
        }
    }
}

/// Splits `src` into tokens. The result always ends with [`Tok::Eof`].
pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut lexer = Lexer {
        chars: src.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        let token = lexer.next_token()?;
        let done = token.tok == Tok::Eof;
        out.push(token);
        if done {
            return Ok(out);
        }
    }
}

/// Cursor over a token vector, shared by the recursive-descent parsers.
pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub(crate) fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Cursor {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn token(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub(crate) fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> SyntaxError {
        let t = self.token();
        SyntaxError::new(t.line, t.column, message)
    }

    pub(crate) fn unexpected(&self, expected: &str) -> SyntaxError {
        self.error(format!("expected {expected}, found {}", self.peek()))
    }

    pub(crate) fn expect(&mut self, tok: &Tok) -> Result<(), SyntaxError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    pub(crate) fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub(crate) fn expect_ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }
}
