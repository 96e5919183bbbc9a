//! Recursive-descent parser for the expression grammar
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' int)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp'
//! number := int ('/' int)? | decimal
//! ```
//!
//! Two small extensions: a leading sign on an `expr` (so printed negative
//! forms parse back) and a signed exponent.

use num_bigint::BigInt;
use num_traits::Num;
use thiserror::Error;

use super::{Expr, Func, Q, VarEnv};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{name}` at position {pos}")]
    UnknownVariable { name: String, pos: usize },
}

pub fn parse(text: &str, env: &VarEnv) -> Result<Expr, ParseError> {
    let mut p = Parser { s: text.as_bytes(), i: 0, env };
    let e = p.expr()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    env: &'a VarEnv,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError::Syntax { pos: self.i, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        let mut acc = self.term()?;
        if neg {
            acc = -acc;
        }
        loop {
            if self.eat(b'+') {
                acc = acc + self.term()?;
            } else if self.eat(b'-') {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = acc * self.factor()?;
            } else if self.peek() == Some(b'/') {
                let pos = self.i;
                self.i += 1;
                let d = self.factor()?;
                if d.is_zero() {
                    return Err(ParseError::Syntax { pos, msg: "division by zero".into() });
                }
                acc = acc / d;
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let b = self.base()?;
        if !self.eat(b'^') {
            return Ok(b);
        }
        let neg = self.eat(b'-');
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if start == self.i {
            return Err(self.err("expected integer exponent"));
        }
        let k: i32 = std::str::from_utf8(&self.s[start..self.i])
            .unwrap()
            .parse()
            .map_err(|_| ParseError::Syntax { pos: start, msg: "exponent too large".into() })?;
        let k = if neg { -k } else { k };
        if k < 0 && b.is_zero() {
            return Err(ParseError::Syntax { pos: start, msg: "negative power of zero".into() });
        }
        Ok(b.powi(k))
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        let int_part = std::str::from_utf8(&self.s[start..self.i]).unwrap().to_string();
        let mut frac = String::new();
        if self.i < self.s.len() && self.s[self.i] == b'.' {
            self.i += 1;
            let fs = self.i;
            while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                self.i += 1;
            }
            frac = std::str::from_utf8(&self.s[fs..self.i]).unwrap().to_string();
            if int_part.is_empty() && frac.is_empty() {
                return Err(ParseError::Syntax { pos: start, msg: "malformed number".into() });
            }
        }
        let digits = format!("{int_part}{frac}");
        let n = BigInt::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10)
            .map_err(|_| ParseError::Syntax { pos: start, msg: "malformed number".into() })?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        Ok(Expr::rational(Q::new(n, d)))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        let name = std::str::from_utf8(&self.s[start..self.i]).unwrap();
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        };
        if let Some(f) = func {
            if self.eat(b'(') {
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                return Ok(Expr::apply(f, &arg));
            }
            return Err(self.err("expected `(` after function name"));
        }
        if !self.env.contains(name) {
            return Err(ParseError::UnknownVariable { name: name.to_string(), pos: start });
        }
        Ok(Expr::var(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::Role;

    fn env() -> VarEnv {
        VarEnv::with(&["x".to_string(), "y".to_string()], Role::Base).unwrap()
    }

    #[test]
    fn reports_positions() {
        assert_eq!(
            parse("x + * y", &env()),
            Err(ParseError::Syntax { pos: 4, msg: "unexpected character".into() })
        );
        assert_eq!(parse("x + z", &env()), Err(ParseError::UnknownVariable { name: "z".into(), pos: 4 }));
        assert!(matches!(parse("(x + y", &env()), Err(ParseError::Syntax { pos: 6, .. })));
        assert!(matches!(parse("x y", &env()), Err(ParseError::Syntax { pos: 2, .. })));
    }

    #[test]
    fn precedence_and_powers() {
        let e = parse("2*x^2/4 - y^-1", &env()).unwrap();
        let f = Expr::ratio(1, 2) * Expr::var("x").powi(2) - Expr::var("y").recip();
        assert_eq!(e, f);
        assert_eq!(parse("3/2", &env()).unwrap(), Expr::ratio(3, 2));
        assert_eq!(parse("1.5", &env()).unwrap(), Expr::ratio(3, 2));
    }

    #[test]
    fn division_by_literal_zero_is_rejected() {
        assert!(parse("x/0", &env()).is_err());
        assert!(parse("x/(y-y)", &env()).is_err());
    }
}
