//! Exact arithmetic in a real number field `Q(θ)`.
//!
//! `θ` is pinned down by a squarefree polynomial together with a rational
//! interval containing exactly one of its real roots. Elements are
//! polynomials in `θ` of degree below the field degree. Signs are decided by
//! interval evaluation on a shrinking bracket, never by floating point.

use crate::expr::{parse_poly, ExprError};
use crate::poly::{fmt_rat, rat, rat_to_f64, Poly, Rat};
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("defining polynomial must have degree at least 1")]
    ConstantPolynomial,
    #[error("defining polynomial is not squarefree")]
    NotSquarefree,
    #[error("isolating interval must satisfy lo < hi")]
    EmptyBracket,
    #[error("defining polynomial vanishes at a bracket endpoint")]
    RootAtEndpoint,
    #[error("bracket contains {0} roots of the defining polynomial, expected exactly 1")]
    RootCount(usize),
    #[error("division by zero")]
    DivisionByZero,
    #[error("element is not invertible: the defining polynomial is reducible")]
    NotInvertible,
    #[error("the rational field has no generator; `t` is not allowed here")]
    NoGenerator,
    #[error("expression error at {0}")]
    Expr(#[from] ExprError),
}

/// A real number field given by a defining polynomial and an isolating interval.
#[derive(Debug)]
pub struct NumberField {
    minpoly: Poly,
    lo: Rat,
    hi: Rat,
    // Narrow bracket computed once so most sign queries finish immediately.
    fine: (Rat, Rat),
    generator_allowed: bool,
}

pub type FieldRef = Arc<NumberField>;

impl NumberField {
    pub fn new(minpoly: Poly, lo: Rat, hi: Rat) -> Result<FieldRef, FieldError> {
        let deg = minpoly.degree().ok_or(FieldError::ConstantPolynomial)?;
        if deg == 0 {
            return Err(FieldError::ConstantPolynomial);
        }
        if lo >= hi {
            return Err(FieldError::EmptyBracket);
        }
        let m = minpoly.monic();
        if m.gcd(&m.derivative()).degree() != Some(0) {
            return Err(FieldError::NotSquarefree);
        }
        if m.eval(&lo).is_zero() || m.eval(&hi).is_zero() {
            return Err(FieldError::RootAtEndpoint);
        }
        let n = m.count_roots(&lo, &hi);
        if n != 1 {
            return Err(FieldError::RootCount(n));
        }
        let mut fine = (lo.clone(), hi.clone());
        let tol = Rat::new(1.into(), num_bigint::BigInt::from(2).pow(96u32));
        while &fine.1 - &fine.0 > tol {
            if !bisect(&m, &mut fine) {
                break;
            }
        }
        Ok(Arc::new(NumberField {
            minpoly: m,
            lo,
            hi,
            fine,
            generator_allowed: true,
        }))
    }

    /// `Q` itself, where expressions may not mention the generator.
    pub fn rationals() -> FieldRef {
        Arc::new(NumberField {
            minpoly: Poly::var(),
            lo: rat(-1, 1),
            hi: rat(1, 1),
            fine: (Rat::zero(), Rat::zero()),
            generator_allowed: false,
        })
    }

    pub fn degree(&self) -> usize {
        self.minpoly.degree().unwrap()
    }

    pub fn minpoly(&self) -> &Poly {
        &self.minpoly
    }

    pub fn bracket(&self) -> (&Rat, &Rat) {
        (&self.lo, &self.hi)
    }

    pub fn is_rational(&self) -> bool {
        !self.generator_allowed
    }

    fn reduce(self: &Arc<Self>, p: &Poly) -> FieldElement {
        let r = p.rem(&self.minpoly);
        let mut c = r.coeffs().to_vec();
        c.resize(self.degree(), Rat::zero());
        FieldElement { field: self.clone(), c }
    }

    pub fn element(self: &Arc<Self>, coeffs: Vec<Rat>) -> FieldElement {
        self.reduce(&Poly::new(coeffs))
    }

    pub fn from_rational(self: &Arc<Self>, r: Rat) -> FieldElement {
        self.element(vec![r])
    }

    pub fn int(self: &Arc<Self>, n: i64) -> FieldElement {
        self.from_rational(rat(n, 1))
    }

    pub fn zero(self: &Arc<Self>) -> FieldElement {
        self.int(0)
    }

    pub fn one(self: &Arc<Self>) -> FieldElement {
        self.int(1)
    }

    /// The generator `θ`.
    pub fn theta(self: &Arc<Self>) -> Result<FieldElement, FieldError> {
        if !self.generator_allowed {
            return Err(FieldError::NoGenerator);
        }
        Ok(self.reduce(&Poly::var()))
    }

    /// Parses `c0 + c1*t + c2*t^2` style expressions, with `t` standing for `θ`.
    pub fn parse(self: &Arc<Self>, src: &str) -> Result<FieldElement, FieldError> {
        let p = parse_poly(src)?;
        if !self.generator_allowed && p.degree().unwrap_or(0) > 0 {
            return Err(FieldError::NoGenerator);
        }
        Ok(self.reduce(&p))
    }

    fn same(&self, other: &NumberField) -> bool {
        std::ptr::eq(self, other) || (self.minpoly == other.minpoly && self.lo == other.lo)
    }
}

/// Halves `br` keeping the root; returns false if the midpoint is the root
/// itself, in which case `br` collapses to that point.
fn bisect(m: &Poly, br: &mut (Rat, Rat)) -> bool {
    let mid = (&br.0 + &br.1) / rat(2, 1);
    let fm = m.eval(&mid);
    if fm.is_zero() {
        br.0 = mid.clone();
        br.1 = mid;
        return false;
    }
    let flo = m.eval(&br.0);
    if (fm.is_positive()) == (flo.is_positive()) {
        br.0 = mid;
    } else {
        br.1 = mid;
    }
    true
}

/// An element of a [`NumberField`] in canonical form.
#[derive(Clone)]
pub struct FieldElement {
    field: FieldRef,
    c: Vec<Rat>,
}

impl FieldElement {
    pub fn field(&self) -> &FieldRef {
        &self.field
    }

    /// Canonical coefficients, length equal to the field degree.
    pub fn coeffs(&self) -> &[Rat] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.is_zero())
    }

    /// The rational value when the element lies in `Q`.
    pub fn as_rational(&self) -> Option<&Rat> {
        if self.c[1..].iter().all(|x| x.is_zero()) {
            Some(&self.c[0])
        } else {
            None
        }
    }

    fn poly(&self) -> Poly {
        Poly::new(self.c.clone())
    }

    fn wrap(&self, c: Vec<Rat>) -> FieldElement {
        FieldElement {
            field: self.field.clone(),
            c,
        }
    }

    /// Sign in `{-1, 0, 1}`; zero exactly when all coefficients vanish.
    pub fn sign(&self) -> i32 {
        if let Some(r) = self.as_rational() {
            return sign_of(r);
        }
        let f = &self.field;
        let p = self.poly();
        let mut br = f.fine.clone();
        let mut checked_reducible = false;
        loop {
            let (lo, hi) = p.eval_interval(&br.0, &br.1);
            if lo.is_positive() {
                return 1;
            }
            if hi.is_negative() {
                return -1;
            }
            if br.0 == br.1 {
                return sign_of(&lo);
            }
            if !checked_reducible {
                checked_reducible = true;
                // With a reducible defining polynomial a nonzero element can
                // still vanish at θ; that happens iff gcd(p, m) has θ as a root.
                let g = p.gcd(&f.minpoly);
                if g.degree().unwrap_or(0) > 0 && g.count_roots(&f.lo, &f.hi) == 1 {
                    return 0;
                }
            }
            bisect(&f.minpoly, &mut br);
        }
    }

    /// Rational interval of width at most `width` containing the value.
    pub fn eval(&self, width: &Rat) -> (Rat, Rat) {
        assert!(width.is_positive(), "width must be positive");
        if let Some(r) = self.as_rational() {
            return (r.clone(), r.clone());
        }
        let f = &self.field;
        let p = self.poly();
        let mut br = f.fine.clone();
        loop {
            let (lo, hi) = p.eval_interval(&br.0, &br.1);
            if &(&hi - &lo) <= width {
                return (lo, hi);
            }
            bisect(&f.minpoly, &mut br);
        }
    }

    pub fn to_f64(&self) -> f64 {
        if let Some(r) = self.as_rational() {
            return rat_to_f64(r);
        }
        let (lo, hi) = self.eval(&rat(1, 1 << 62));
        rat_to_f64(&((lo + hi) / rat(2, 1)))
    }

    pub fn abs(&self) -> FieldElement {
        if self.sign() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn checked_div(&self, o: &FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self * &o.recip()?)
    }

    pub fn recip(&self) -> Result<FieldElement, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        if let Some(r) = self.as_rational() {
            return Ok(self.field.from_rational(r.recip()));
        }
        let (g, s) = self.poly().inverse_mod(&self.field.minpoly);
        if g.degree() != Some(0) {
            return Err(FieldError::NotInvertible);
        }
        Ok(self.field.reduce(&s))
    }

    pub fn pow(&self, e: u32) -> FieldElement {
        let mut acc = self.field.one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Expression string accepted by [`NumberField::parse`].
    pub fn render(&self) -> String {
        self.poly().render()
    }

    pub fn min(self, o: FieldElement) -> FieldElement {
        if o < self {
            o
        } else {
            self
        }
    }

    pub fn max(self, o: FieldElement) -> FieldElement {
        if o > self {
            o
        } else {
            self
        }
    }
}

fn sign_of(r: &Rat) -> i32 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, o: &Self) -> bool {
        debug_assert!(self.field.same(&o.field));
        self.c == o.c
    }
}

impl Eq for FieldElement {}

impl Hash for FieldElement {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.c.hash(h);
    }
}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for FieldElement {
    fn cmp(&self, o: &Self) -> Ordering {
        if self.c.len() == 1 {
            return self.c[0].cmp(&o.c[0]);
        }
        if self.c == o.c {
            return Ordering::Equal;
        }
        (self - o).sign().cmp(&0)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.as_rational() {
            return f.write_str(&fmt_rat(r));
        }
        f.write_str(&self.render())
    }
}

impl Add for &FieldElement {
    type Output = FieldElement;
    fn add(self, o: &FieldElement) -> FieldElement {
        self.wrap(self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &FieldElement {
    type Output = FieldElement;
    fn sub(self, o: &FieldElement) -> FieldElement {
        self.wrap(self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect())
    }
}

impl Mul for &FieldElement {
    type Output = FieldElement;
    fn mul(self, o: &FieldElement) -> FieldElement {
        if self.c.len() == 1 {
            return self.wrap(vec![&self.c[0] * &o.c[0]]);
        }
        if let Some(r) = self.as_rational() {
            return o.wrap(o.c.iter().map(|x| x * r).collect());
        }
        if let Some(r) = o.as_rational() {
            return self.wrap(self.c.iter().map(|x| x * r).collect());
        }
        self.field.reduce(&self.poly().mul(&o.poly()))
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        self.wrap(self.c.iter().map(|a| -a).collect())
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}

impl FieldElement {
    /// Multiplies by a rational scalar.
    pub fn scale(&self, r: &Rat) -> FieldElement {
        self.wrap(self.c.iter().map(|x| x * r).collect())
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(|r| r.is_one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> FieldRef {
        NumberField::new(parse_poly("t^2 + t - 1").unwrap(), rat(1, 2), rat(2, 3)).unwrap()
    }

    #[test]
    fn golden_identities() {
        let f = golden();
        let t = f.theta().unwrap();
        assert_eq!(&t * &t, f.parse("1 - t").unwrap());
        assert_eq!(t.recip().unwrap(), f.parse("t + 1").unwrap());
        assert_eq!(&t + &f.zero(), t);
    }

    #[test]
    fn golden_signs() {
        let f = golden();
        assert_eq!(f.zero().sign(), 0);
        assert_eq!(f.theta().unwrap().sign(), 1);
        assert_eq!(f.parse("2*t - 1").unwrap().sign(), 1);
        assert_eq!(f.parse("1 - 2*t").unwrap().sign(), -1);
        // 0.618034 vs 0.618033: distinguishable only after refinement.
        assert_eq!(f.parse("t - 618033/1000000").unwrap().sign(), 1);
        assert_eq!(f.parse("t - 618034/1000000").unwrap().sign(), -1);
    }

    #[test]
    fn golden_eval_brackets() {
        let f = golden();
        let m = f.minpoly().clone();
        let w = rat(1, 1000);
        // Exact oracle: θ ∈ [lo, hi] iff m changes sign from ≤ 0 to ≥ 0 there.
        let (lo, hi) = f.theta().unwrap().eval(&w);
        assert!(!m.eval(&lo).is_positive() && !m.eval(&hi).is_negative());
        assert!(&hi - &lo <= w);
        assert!((rat_to_f64(&lo) - 0.6180339887).abs() < 1e-3);
        let (lo, hi) = f.parse("1 - t").unwrap().eval(&w);
        let one = Rat::one();
        assert!(!m.eval(&(&one - &hi)).is_positive() && !m.eval(&(&one - &lo)).is_negative());
        assert!((rat_to_f64(&lo) - 0.3819660112).abs() < 1e-3);
        assert_eq!(f.zero().eval(&w), (Rat::zero(), Rat::zero()));
    }

    #[test]
    fn rejects_bad_fields() {
        let m = parse_poly("t^2 + t - 1").unwrap();
        assert_eq!(
            NumberField::new(m.clone(), rat(-2, 1), rat(1, 1)).unwrap_err(),
            FieldError::RootCount(2)
        );
        let sq = parse_poly("(t^2 - 2)^2").unwrap();
        assert_eq!(
            NumberField::new(sq, rat(1, 1), rat(2, 1)).unwrap_err(),
            FieldError::NotSquarefree
        );
        assert!(NumberField::new(m, rat(2, 3), rat(1, 2)).is_err());
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let f = golden();
        assert_eq!(f.one().checked_div(&f.zero()).unwrap_err(), FieldError::DivisionByZero);
        let q = NumberField::rationals();
        assert!(q.one().recip().is_ok());
        assert!(q.zero().recip().is_err());
    }

    #[test]
    fn rational_field_rejects_generator() {
        let q = NumberField::rationals();
        assert!(q.parse("1/3").is_ok());
        assert_eq!(q.parse("t").unwrap_err(), FieldError::NoGenerator);
    }

    #[test]
    fn reducible_polynomial_zero_detection() {
        // (t^2 - 2)(t - 3), root sqrt(2) isolated; t^2 - 2 is a nonzero zero divisor.
        let m = parse_poly("(t^2 - 2)*(t - 3)").unwrap();
        let f = NumberField::new(m, rat(1, 1), rat(2, 1)).unwrap();
        assert_eq!(f.parse("t^2 - 2").unwrap().sign(), 0);
        assert_eq!(f.parse("t - 3").unwrap().sign(), -1);
    }
}
