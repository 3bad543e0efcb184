//! A small expression language for the time-dependent coefficients `a_k(t)`:
//! numeric literals, the variable `t`, `+ - * / ^` (integer powers), unary
//! minus, `sin`, `cos`, `exp`, and parentheses. Precedence is
//! `^` > unary `-` > `* /` > `+ -`, with the binary operators left
//! associative.
//!
//! The raw parser is shared with the machine-readable equation format, which
//! uses the same grammar over the variables `uK` and `aK`.

use std::fmt;

/// Parse error with a byte offset into the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at offset {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Runtime evaluation error.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub t: f64,
    pub message: String,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "evaluation error at t = {}: {}", self.t, self.message)
    }
}

impl std::error::Error for EvalError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }
}

/// Expression tree over named identifiers; validation of the identifiers is
/// left to the caller (the coefficient DSL admits only `t`).
#[derive(Debug, Clone, PartialEq)]
pub enum RawExpr {
    Number(f64),
    Ident(String),
    Unary(Box<RawExpr>),
    Add(Box<RawExpr>, Box<RawExpr>),
    Sub(Box<RawExpr>, Box<RawExpr>),
    Mul(Box<RawExpr>, Box<RawExpr>),
    Div(Box<RawExpr>, Box<RawExpr>),
    Pow(Box<RawExpr>, u32),
    Call(Func, Box<RawExpr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Token, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Token::Eof, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                let mut seen_dot = false;
                let mut seen_exp = false;
                while end < self.src.len() {
                    match self.src[end] {
                        b'0'..=b'9' => end += 1,
                        b'.' if !seen_dot && !seen_exp => {
                            seen_dot = true;
                            end += 1;
                        }
                        b'e' | b'E' if !seen_exp && end > self.pos => {
                            let mut peek = end + 1;
                            if peek < self.src.len()
                                && (self.src[peek] == b'+' || self.src[peek] == b'-')
                            {
                                peek += 1;
                            }
                            if peek < self.src.len() && self.src[peek].is_ascii_digit() {
                                seen_exp = true;
                                end = peek + 1;
                            } else {
                                break;
                            }
                        }
                        _ => break,
                    }
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                let value: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    message: format!("bad number literal `{}`", text),
                })?;
                self.pos = end;
                return Ok((Token::Number(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap().to_string();
                self.pos = end;
                return Ok((Token::Ident(text), start));
            }
            other => {
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Token,
    offset: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let (current, offset) = lexer.next()?;
        Ok(Parser { lexer, current, offset })
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, off) = self.lexer.next()?;
        self.current = tok;
        self.offset = off;
        Ok(())
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ParseError> {
        if self.current == want {
            self.advance()
        } else {
            Err(ParseError { offset: self.offset, message: format!("expected {}", what) })
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<RawExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.current {
                Token::Plus => {
                    self.advance()?;
                    lhs = RawExpr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.advance()?;
                    lhs = RawExpr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<RawExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.current {
                Token::Star => {
                    self.advance()?;
                    lhs = RawExpr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.advance()?;
                    lhs = RawExpr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<RawExpr, ParseError> {
        if self.current == Token::Minus {
            self.advance()?;
            Ok(RawExpr::Unary(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    // power := atom ('^' integer)?   -- binds tighter than unary minus
    fn power(&mut self) -> Result<RawExpr, ParseError> {
        let base = self.atom()?;
        if self.current == Token::Caret {
            self.advance()?;
            let off = self.offset;
            match self.current.clone() {
                Token::Number(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                    self.advance()?;
                    Ok(RawExpr::Pow(Box::new(base), v as u32))
                }
                _ => Err(ParseError {
                    offset: off,
                    message: "exponent must be a nonnegative integer".into(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<RawExpr, ParseError> {
        match self.current.clone() {
            Token::Number(v) => {
                self.advance()?;
                Ok(RawExpr::Number(v))
            }
            Token::Ident(name) => {
                self.advance()?;
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    _ => None,
                };
                match func {
                    Some(f) => {
                        self.expect(Token::LParen, "`(` after function name")?;
                        let arg = self.expr()?;
                        self.expect(Token::RParen, "`)`")?;
                        Ok(RawExpr::Call(f, Box::new(arg)))
                    }
                    None => Ok(RawExpr::Ident(name)),
                }
            }
            Token::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(ParseError { offset: self.offset, message: "expected an expression".into() }),
        }
    }
}

/// Parse without validating identifiers.
pub fn parse_raw(src: &str) -> Result<RawExpr, ParseError> {
    let mut parser = Parser::new(src)?;
    let expr = parser.expr()?;
    if parser.current != Token::Eof {
        return Err(ParseError { offset: parser.offset, message: "trailing input".into() });
    }
    Ok(expr)
}

/// A validated coefficient expression over the single variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffExpr {
    expr: RawExpr,
}

/// Parse a coefficient expression; only `t` may appear as an identifier.
pub fn parse_expr(src: &str) -> Result<CoeffExpr, ParseError> {
    let expr = parse_raw(src)?;
    validate_idents(&expr, src)?;
    Ok(CoeffExpr { expr })
}

fn validate_idents(expr: &RawExpr, src: &str) -> Result<(), ParseError> {
    match expr {
        RawExpr::Ident(name) => {
            if name == "t" {
                Ok(())
            } else {
                Err(ParseError {
                    offset: src.find(name.as_str()).unwrap_or(0),
                    message: format!("unknown identifier `{}`", name),
                })
            }
        }
        RawExpr::Number(_) => Ok(()),
        RawExpr::Unary(e) | RawExpr::Pow(e, _) | RawExpr::Call(_, e) => validate_idents(e, src),
        RawExpr::Add(a, b) | RawExpr::Sub(a, b) | RawExpr::Mul(a, b) | RawExpr::Div(a, b) => {
            validate_idents(a, src)?;
            validate_idents(b, src)
        }
    }
}

impl CoeffExpr {
    pub fn constant(v: f64) -> Self {
        CoeffExpr { expr: RawExpr::Number(v) }
    }

    pub fn zero() -> Self {
        CoeffExpr::constant(0.0)
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self.expr, RawExpr::Number(v) if v == 0.0)
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        eval_raw(&self.expr, t)
    }

    /// Canonical printed form; `parse(print(e))` evaluates identically and
    /// printing is a fixpoint.
    pub fn print(&self) -> String {
        print_raw(&self.expr)
    }
}

pub fn eval_expr(e: &CoeffExpr, t: f64) -> Result<f64, EvalError> {
    e.eval(t)
}

fn eval_raw(expr: &RawExpr, t: f64) -> Result<f64, EvalError> {
    Ok(match expr {
        RawExpr::Number(v) => *v,
        RawExpr::Ident(_) => t,
        RawExpr::Unary(e) => -eval_raw(e, t)?,
        RawExpr::Add(a, b) => eval_raw(a, t)? + eval_raw(b, t)?,
        RawExpr::Sub(a, b) => eval_raw(a, t)? - eval_raw(b, t)?,
        RawExpr::Mul(a, b) => eval_raw(a, t)? * eval_raw(b, t)?,
        RawExpr::Div(a, b) => {
            let den = eval_raw(b, t)?;
            if den == 0.0 {
                return Err(EvalError { t, message: "division by zero".into() });
            }
            eval_raw(a, t)? / den
        }
        RawExpr::Pow(e, p) => eval_raw(e, t)?.powi(*p as i32),
        RawExpr::Call(f, e) => {
            let v = eval_raw(e, t)?;
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
            }
        }
    })
}

fn precedence(expr: &RawExpr) -> u8 {
    match expr {
        RawExpr::Add(..) | RawExpr::Sub(..) => 1,
        RawExpr::Mul(..) | RawExpr::Div(..) => 2,
        RawExpr::Unary(..) => 3,
        RawExpr::Pow(..) => 4,
        RawExpr::Number(_) | RawExpr::Ident(_) | RawExpr::Call(..) => 5,
    }
}

fn print_child(child: &RawExpr, parent_prec: u8, right_side: bool) -> String {
    let p = precedence(child);
    if p < parent_prec || (p == parent_prec && right_side) {
        format!("({})", print_raw(child))
    } else {
        print_raw(child)
    }
}

pub(crate) fn print_raw(expr: &RawExpr) -> String {
    match expr {
        RawExpr::Number(v) => {
            if *v < 0.0 {
                format!("(-{})", -v)
            } else {
                format!("{}", v)
            }
        }
        RawExpr::Ident(name) => name.clone(),
        RawExpr::Unary(e) => format!("-{}", print_child(e, 3, false)),
        RawExpr::Add(a, b) => {
            format!("{} + {}", print_child(a, 1, false), print_child(b, 1, true))
        }
        RawExpr::Sub(a, b) => {
            format!("{} - {}", print_child(a, 1, false), print_child(b, 1, true))
        }
        RawExpr::Mul(a, b) => {
            format!("{}*{}", print_child(a, 2, false), print_child(b, 2, true))
        }
        RawExpr::Div(a, b) => {
            format!("{}/{}", print_child(a, 2, false), print_child(b, 2, true))
        }
        RawExpr::Pow(e, p) => format!("{}^{}", print_child(e, 4, true), p),
        RawExpr::Call(f, e) => format!("{}({})", f.name(), print_raw(e)),
    }
}
