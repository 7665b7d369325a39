use super::{Expr, Func, Var};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at offset {offset} (line {line}, column {column})")]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    /// 1-based line.
    pub line: usize,
    /// 1-based column, counted in characters.
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: found {found}, expected one of {}", .expected.join(", "))]
    Syntax {
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("`{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid number literal `{0}`")]
    InvalidNumber(String),
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

const OPERAND: &[&str] = &["number", "identifier", "`(`", "`-`"];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            let start = lx.pos;
            let Some(c) = lx.peek() else {
                out.push((Tok::Eof, start));
                return Ok(out);
            };
            let tok = match c {
                '+' => lx.single(Tok::Plus),
                '-' => lx.single(Tok::Minus),
                '*' => lx.single(Tok::Star),
                '/' => lx.single(Tok::Slash),
                '^' => lx.single(Tok::Caret),
                '(' => lx.single(Tok::LParen),
                ')' => lx.single(Tok::RParen),
                ',' => lx.single(Tok::Comma),
                c if c.is_ascii_digit() || c == '.' => lx.number()?,
                c if c.is_ascii_alphabetic() || c == '_' => lx.ident(),
                other => return Err(error_at(src, start, ParseErrorKind::UnexpectedChar(other))),
            };
            out.push((tok, start));
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.bump();
        tok
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        self.pos - start
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let mut n = self.digits();
        if self.peek() == Some('.') {
            self.bump();
            n += self.digits();
        }
        if n == 0 {
            return Err(error_at(
                self.src,
                start,
                ParseErrorKind::InvalidNumber(self.src[start..self.pos].to_string()),
            ));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.digits() == 0 {
                // Not an exponent after all; leave `e` for the identifier lexer.
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Tok::Num(v)),
            _ => Err(error_at(
                self.src,
                start,
                ParseErrorKind::InvalidNumber(text.to_string()),
            )),
        }
    }

    fn ident(&mut self) -> Tok {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.bump();
        }
        Tok::Ident(self.src[start..self.pos].to_string())
    }
}

fn error_at(src: &str, offset: usize, kind: ParseErrorKind) -> ParseError {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let column = before[line_start..].chars().count() + 1;
    ParseError {
        offset,
        line,
        column,
        kind,
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

/// Parses an expression in the variables `t` and `y`.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokenize(src)?;
    let mut p = Parser { src, toks, idx: 0 };
    let e = p.expr()?;
    match p.peek() {
        Tok::Eof => Ok(e),
        _ => Err(p.unexpected(&["`+`", "`-`", "`*`", "`/`", "`^`", "end of input"])),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].0
    }

    fn offset(&self) -> usize {
        self.toks[self.idx].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.idx].0.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        error_at(
            self.src,
            self.offset(),
            ParseErrorKind::Syntax {
                found: self.peek().describe(),
                expected: expected.to_vec(),
            },
        )
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.next();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.next();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.next();
                match name.as_str() {
                    "t" => return Ok(Expr::Var(Var::T)),
                    "y" => return Ok(Expr::Var(Var::Y)),
                    _ => {}
                }
                let arity = match name.as_str() {
                    "min" | "max" => 2,
                    "clamp" => 3,
                    "ifle" => 4,
                    n if Func::from_name(n).is_some() => 1,
                    _ => {
                        return Err(error_at(
                            self.src,
                            start,
                            ParseErrorKind::UnknownIdentifier(name),
                        ))
                    }
                };
                self.expect(Tok::LParen, "`(`")?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.next();
                    args.push(self.expr()?);
                }
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected(&["`,`", "`)`"]));
                }
                self.next();
                if args.len() != arity {
                    return Err(error_at(
                        self.src,
                        start,
                        ParseErrorKind::Arity {
                            name,
                            expected: arity,
                            got: args.len(),
                        },
                    ));
                }
                let mut it = args.into_iter().map(Box::new);
                let mut arg = || it.next().unwrap();
                Ok(match name.as_str() {
                    "min" => Expr::Min(arg(), arg()),
                    "max" => Expr::Max(arg(), arg()),
                    "clamp" => Expr::Clamp(arg(), arg(), arg()),
                    "ifle" => Expr::IfLe(Box::new([*arg(), *arg(), *arg(), *arg()])),
                    n => Expr::Call(Func::from_name(n).unwrap(), arg()),
                })
            }
            _ => Err(self.unexpected(OPERAND)),
        }
    }
}
