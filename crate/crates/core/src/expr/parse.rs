//! Recursive-descent parser for the expression grammar.
//!
//! Precedence, loosest to tightest: `+ -`, `* /`, unary `-`, `^`
//! (right-associative), primaries. `#` starts a comment running to the end
//! of the input line; whitespace is insignificant. Variables are written
//! `x0 … x{d-1}`; `pi` and `e` are accepted as constants.

use thiserror::Error;

use super::{Expr, Func};

/// A parse failure, located by byte offset into the input.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at offset {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("malformed number literal")]
    BadNumber,
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("variable x{index} out of range for dimension {dim}")]
    VarOutOfRange { index: usize, dim: usize },
    #[error("function `{0}` must be followed by a parenthesized argument")]
    FunctionNeedsArgument(&'static str),
    #[error("expected {expected}, found {found}")]
    Unexpected {
        expected: &'static str,
        found: String,
    },
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
            Tok::Eof => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                // exponent only when it is actually followed by digits,
                // so `2*e` still lexes `e` as an identifier
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let v: f64 = text[start..i].parse().map_err(|_| ParseError {
                    offset: start,
                    kind: ParseErrorKind::BadNumber,
                })?;
                toks.push((Tok::Num(v), start));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError {
                    offset: i,
                    kind: ParseErrorKind::UnexpectedChar(c),
                })
            }
        }
    }
    toks.push((Tok::Eof, text.len()));
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind: ParseErrorKind::Unexpected {
                expected,
                found: self.peek().describe(),
            },
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::RParen) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected("`)`"))
        }
    }

    // sum := term (('+'|'-') term)*
    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary (('*'|'/') unary)*
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power
    // `^` binds tighter than unary minus: -x0^2 is -(x0^2)
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    // power := primary ('^' unary)?   (right-associative)
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if matches!(self.peek(), Tok::Caret) {
            self.bump();
            let exponent = self.unary()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Literal(v)),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(&name, offset),
            other => Err(ParseError {
                offset,
                kind: ParseErrorKind::Unexpected {
                    expected: "an operand",
                    found: other.describe(),
                },
            }),
        }
    }

    fn identifier(&mut self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| ParseError {
                    offset,
                    kind: ParseErrorKind::BadNumber,
                })?;
                if index >= self.dim {
                    return Err(ParseError {
                        offset,
                        kind: ParseErrorKind::VarOutOfRange {
                            index,
                            dim: self.dim,
                        },
                    });
                }
                return Ok(Expr::Var(index));
            }
        }
        match name {
            "pi" => return Ok(Expr::Literal(std::f64::consts::PI)),
            "e" => return Ok(Expr::Literal(std::f64::consts::E)),
            _ => {}
        }
        let func = match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => {
                return Err(ParseError {
                    offset,
                    kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
                })
            }
        };
        if !matches!(self.peek(), Tok::LParen) {
            return Err(ParseError {
                offset: self.offset(),
                kind: ParseErrorKind::FunctionNeedsArgument(func.name()),
            });
        }
        self.bump();
        let arg = self.sum()?;
        self.expect_rparen()?;
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

/// Parse `text` into an expression over variables `x0 … x{d-1}`.
pub fn parse_expression(text: &str, d: usize) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        dim: d,
    };
    let expr = parser.sum()?;
    if !matches!(parser.peek(), Tok::Eof) {
        return Err(parser.unexpected("end of input"));
    }
    Ok(expr)
}
