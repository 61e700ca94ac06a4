//! Parser for polynomial expressions in the generator `t`.
//!
//! Accepts sums and products of rationals (`3`, `-2/7`, `0.25`), powers of `t`,
//! and parentheses: `1 - t`, `2*t^2 + 1/3*t - 1`, `(t + 1)/2`.

use crate::poly::{Poly, Rat};
use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("column {column}: {message}")]
pub struct ExprError {
    /// 1-based character column inside the expression.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rat),
    Var,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Open,
    Close,
}

fn err<T>(column: usize, message: impl Into<String>) -> Result<T, ExprError> {
    Err(ExprError {
        column,
        message: message.into(),
    })
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            ' ' | '\t' => {
                i += 1;
                continue;
            }
            '+' => out.push((Tok::Plus, col)),
            '-' => out.push((Tok::Minus, col)),
            '*' => out.push((Tok::Star, col)),
            '/' => out.push((Tok::Slash, col)),
            '^' => out.push((Tok::Caret, col)),
            '(' => out.push((Tok::Open, col)),
            ')' => out.push((Tok::Close, col)),
            't' => out.push((Tok::Var, col)),
            d if d.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push((Tok::Num(decimal(&text, col)?), col));
                continue;
            }
            other => return err(col, format!("unexpected character '{other}'")),
        }
        i += 1;
    }
    Ok(out)
}

fn decimal(text: &str, col: usize) -> Result<Rat, ExprError> {
    let (int, frac) = match text.split_once('.') {
        Some((a, b)) => (a, b),
        None => (text, ""),
    };
    if int.is_empty() || frac.contains('.') {
        return err(col, format!("malformed number '{text}'"));
    }
    let digits = format!("{int}{frac}");
    let n: BigInt = digits.parse().map_err(|_| ExprError {
        column: col,
        message: format!("malformed number '{text}'"),
    })?;
    let d = num_traits::pow(BigInt::from(10), frac.len());
    Ok(Rat::new(n, d))
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn expr(&mut self) -> Result<Poly, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let col = self.col();
                    let d = self.unary()?;
                    match d.degree() {
                        Some(0) => acc = acc.scale(&d.coeff(0).recip()),
                        None => return err(col, "division by zero"),
                        _ => return err(col, "division by a non-constant"),
                    }
                }
                // Implicit product such as `2t` or `3(t+1)`.
                Some(Tok::Var) | Some(Tok::Open) | Some(Tok::Num(_)) => {
                    acc = acc.mul(&self.power()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Poly, ExprError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let col = self.col();
            match self.peek().cloned() {
                Some(Tok::Num(n)) if n.is_integer() && n <= Rat::from_integer(64.into()) => {
                    self.pos += 1;
                    let e: u32 = n.to_integer().try_into().unwrap_or(0);
                    return Ok(base.pow(e));
                }
                _ => return err(col, "exponent must be an integer between 0 and 64"),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly, ExprError> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Poly::constant(n))
            }
            Some(Tok::Var) => {
                self.pos += 1;
                Ok(Poly::var())
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::Close) {
                    return err(self.col(), "expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(t) => err(col, format!("unexpected token {t:?}")),
            None => err(col, "unexpected end of expression"),
        }
    }
}

/// Parses a polynomial expression in `t` with rational coefficients.
pub fn parse_poly(src: &str) -> Result<Poly, ExprError> {
    let toks = lex(src)?;
    let end = src.chars().count() + 1;
    if toks.is_empty() {
        return err(1, "empty expression");
    }
    let mut p = Parser { toks, pos: 0, end };
    let out = p.expr()?;
    if p.pos != p.toks.len() {
        return err(p.col(), "trailing input");
    }
    Ok(out)
}

/// Parses a plain rational such as `3/8`, `-2` or `0.125`.
pub fn parse_rational(src: &str) -> Result<Rat, ExprError> {
    let p = parse_poly(src)?;
    match p.degree() {
        None => Ok(Rat::zero()),
        Some(0) => Ok(p.coeff(0)),
        _ => err(1, "expected a rational number"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat, rat_int};

    #[test]
    fn parses_spec_form() {
        let p = parse_poly("1/2 + 3*t - 2/3*t^2").unwrap();
        assert_eq!(p, Poly::new(vec![rat(1, 2), rat_int(3), rat(-2, 3)]));
    }

    #[test]
    fn parses_implicit_products_and_parens() {
        assert_eq!(parse_poly("2t").unwrap(), parse_poly("2*t").unwrap());
        assert_eq!(parse_poly("(t+1)/2").unwrap(), Poly::new(vec![rat(1, 2), rat(1, 2)]));
        assert_eq!(parse_rational("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rational("-3/8").unwrap(), rat(-3, 8));
    }

    #[test]
    fn reports_columns() {
        let e = parse_poly("1 + ?").unwrap_err();
        assert_eq!(e.column, 5);
        let e = parse_poly("1/0").unwrap_err();
        assert_eq!(e.column, 3);
        assert!(parse_poly("t^t").is_err());
        assert!(parse_poly("(1 + t").is_err());
    }

    #[test]
    fn render_parses_back() {
        for s in ["1 - t", "-1 + t + t^2", "2/3*t^3 - 1/7", "0"] {
            let p = parse_poly(s).unwrap();
            assert_eq!(parse_poly(&p.render()).unwrap(), p);
        }
    }
}
