//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | atom ('^' ['-'] int)?
//! atom   := number | 'x' int | fn '(' expr ')' | '(' expr ')'
//! fn     := sin | cos | exp | sqrt
//! number := int ('/' int)? | int '.' int
//! ```
//!
//! An `int/int` literal is only recognised when the slash touches both
//! digit runs (`1/2`); `1 / 2` parses as a division. Both evaluate alike.

use num_traits::{One, Zero};

use super::{Expr, Func};
use crate::error::{Error, Result};
use crate::Rational;

/// Parses `text` as an expression in the variables `x0..x{arity-1}`.
pub fn parse_expression(text: &str, arity: usize) -> Result<Expr> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, arity };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    arity: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let negative = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            self.skip_ws();
            let start = self.pos;
            let digits = self.digits().ok_or_else(|| self.error("expected integer exponent"))?;
            let n: i32 = digits.parse().map_err(|_| Error::Syntax { offset: start, message: "exponent out of range".into() })?;
            return Ok(Expr::Pow(Box::new(base), if negative { -n } else { n }));
        }
        Ok(base)
    }

    fn digits(&mut self) -> Option<String> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn integer(&self, digits: &str, offset: usize) -> Result<i64> {
        digits.parse().map_err(|_| Error::Syntax { offset, message: "integer literal out of range".into() })
    }

    fn atom(&mut self) -> Result<Expr> {
        let c = self.peek().ok_or_else(|| self.error("unexpected end of input"))?;
        let start = self.pos;
        if c.is_ascii_digit() {
            return self.number(start);
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_alphabetic() {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            if let Some(rest) = ident.strip_prefix('x') {
                if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                    let index: usize =
                        rest.parse().map_err(|_| Error::Syntax { offset: start, message: "variable index out of range".into() })?;
                    if index >= self.arity {
                        return Err(Error::VariableOutOfRange { index, arity: self.arity });
                    }
                    return Ok(Expr::Var(index));
                }
            }
            let func = Func::from_name(ident).ok_or_else(|| Error::UnknownIdentifier { name: ident.to_string(), offset: start })?;
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        Err(self.error(&format!("unexpected character `{}`", c as char)))
    }

    fn number(&mut self, start: usize) -> Result<Expr> {
        let whole = self.digits().expect("caller saw a digit");
        let at = |p: &Self, i: usize| p.src.get(p.pos + i).copied();
        if at(self, 0) == Some(b'.') && at(self, 1).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
            let frac = self.digits().expect("digit checked");
            let scale =
                10i64.checked_pow(frac.len() as u32).ok_or_else(|| Error::Syntax { offset: start, message: "decimal too long".into() })?;
            let n = self.integer(&format!("{whole}{frac}"), start)?;
            return Ok(Expr::Const(Rational::new(n, scale)));
        }
        let numer = self.integer(&whole, start)?;
        if at(self, 0) == Some(b'/') && at(self, 1).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
            let den_start = self.pos;
            let den = self.digits().expect("digit checked");
            let den = self.integer(&den, den_start)?;
            if den.is_zero() {
                return Err(Error::Syntax { offset: den_start, message: "zero denominator".into() });
            }
            return Ok(Expr::Const(Rational::new(numer, den)));
        }
        Ok(Expr::Const(Rational::new(numer, i64::one())))
    }
}
