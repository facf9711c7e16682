//! A tiny arithmetic-expression reader shared by every polynomial type.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    := ['-'|'+'] term (('+'|'-') term)*
//! term    := power (('*' power) | ('/' power))*
//! power   := atom ('^' integer)?
//! atom    := number | identifier | '(' expr ')'
//! ```
//!
//! Division is only meaningful by constants; that is checked by the evaluators,
//! not by the reader.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(BigRational),
    Var { name: String, offset: usize },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>, usize),
    Pow(Box<Expr>, u32),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{message} at offset {offset}")]
pub struct ExprError {
    pub offset: usize,
    pub message: String,
}

impl ExprError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

const MAX_EXPONENT: u32 = 64;
const MAX_DEPTH: usize = 64;

pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Reader {
        src: text.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(ExprError::new(
            p.pos,
            format!("unexpected '{}'", p.src[p.pos] as char),
        ));
    }
    Ok(e)
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl Reader<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ExprError::new(self.pos, "expression nested too deeply"));
        }
        let mut lhs = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Expr::Neg(Box::new(self.term()?))
            }
            Some(b'+') => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
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
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.power()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.power()?), at);
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            let digits = self.take_while(|b| b.is_ascii_digit());
            if digits.is_empty() {
                return Err(ExprError::new(start, "expected exponent"));
            }
            let k: u32 = digits
                .parse()
                .ok()
                .filter(|k| *k <= MAX_EXPONENT)
                .ok_or_else(|| ExprError::new(start, "exponent too large"))?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(ExprError::new(self.pos, "expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b) if b.is_ascii_digit() => {
                let digits = self.take_while(|b| b.is_ascii_digit());
                let n: BigInt = digits.parse().expect("digits");
                Ok(Expr::Num(BigRational::from_integer(n)))
            }
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                let offset = self.pos;
                let name = self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.');
                Ok(Expr::Var { name, offset })
            }
            Some(b) => Err(ExprError::new(
                self.pos,
                format!("unexpected '{}'", b as char),
            )),
            None => Err(ExprError::new(self.pos, "unexpected end of expression")),
        }
    }

    fn take_while(&mut self, f: impl Fn(u8) -> bool) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && f(self.src[self.pos]) {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }
}

/// Operations an evaluator target must support.
pub trait Algebra: Sized + Clone {
    fn from_rational(&self, r: BigRational) -> Self;
    fn variable(&self, name: &str, offset: usize) -> Result<Self, ExprError>;
    fn add(&self, a: Self, b: Self) -> Result<Self, ExprError>;
    fn mul(&self, a: Self, b: Self, offset: usize) -> Result<Self, ExprError>;
    fn neg(&self, a: Self) -> Self;
    /// The value as a rational constant, if it is one.
    fn as_constant(&self, a: &Self) -> Option<BigRational>;
}

/// Folds `expr` into the algebra described by `ctx`.
pub fn evaluate<A: Algebra>(ctx: &A, expr: &Expr) -> Result<A, ExprError> {
    Ok(match expr {
        Expr::Num(r) => ctx.from_rational(r.clone()),
        Expr::Var { name, offset } => ctx.variable(name, *offset)?,
        Expr::Neg(a) => ctx.neg(evaluate(ctx, a)?),
        Expr::Add(a, b) => ctx.add(evaluate(ctx, a)?, evaluate(ctx, b)?)?,
        Expr::Sub(a, b) => {
            let b = ctx.neg(evaluate(ctx, b)?);
            ctx.add(evaluate(ctx, a)?, b)?
        }
        Expr::Mul(a, b) => ctx.mul(evaluate(ctx, a)?, evaluate(ctx, b)?, 0)?,
        Expr::Div(a, b, offset) => {
            let d = evaluate(ctx, b)?;
            let d = ctx
                .as_constant(&d)
                .ok_or_else(|| ExprError::new(*offset, "division by a non-constant"))?;
            if d.is_zero() {
                return Err(ExprError::new(*offset, "division by zero"));
            }
            ctx.mul(evaluate(ctx, a)?, ctx.from_rational(d.recip()), *offset)?
        }
        Expr::Pow(a, k) => {
            let base = evaluate(ctx, a)?;
            let mut acc = ctx.from_rational(BigRational::one());
            for _ in 0..*k {
                acc = ctx.mul(acc, base.clone(), 0)?;
            }
            acc
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = parse("1 + 2*x^2").unwrap();
        match e {
            Expr::Add(_, rhs) => assert!(matches!(*rhs, Expr::Mul(_, _))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse("1 + ").unwrap_err().offset, 4);
        assert_eq!(parse("x^").unwrap_err().offset, 2);
        assert_eq!(parse("(x").unwrap_err().offset, 2);
        assert_eq!(parse("x $").unwrap_err().offset, 2);
        assert!(parse("x^999").is_err());
        assert!(parse(&"(".repeat(200)).is_err());
    }
}
