//! Dense univariate polynomials with rational coefficients.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Natural log of a positive big integer, safe for values beyond f64 range.
pub fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        return n.to_f64().unwrap_or(f64::NAN).ln();
    }
    let shift = bits - 64;
    let top: BigInt = n >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational.
pub fn ln_rat(r: &Rat) -> f64 {
    debug_assert!(r.is_positive());
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    match r.to_f64() {
        Some(x) if x.is_finite() => x,
        _ => {
            let s = if r.is_negative() { -1.0 } else { 1.0 };
            s * ln_rat(&r.abs()).exp()
        }
    }
}

/// Prints `p/q`, or `p` for integers.
pub fn fmt_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Twelve significant digits, shortest form; `inf`, `-inf` and `nan` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let r: f64 = format!("{x:.11e}").parse().expect("round trip");
    format!("{r}")
}

/// Coefficients from low to high degree, without trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly(Vec<Rat>);

impl Poly {
    pub fn new(mut c: Vec<Rat>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Poly(c)
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: Rat) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `t`.
    pub fn var() -> Self {
        Poly(vec![Rat::zero(), Rat::one()])
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn lead(&self) -> Option<&Rat> {
        self.0.last()
    }

    pub fn coeff(&self, i: usize) -> Rat {
        self.0.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly::new((0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, k: &Rat) -> Poly {
        Poly::new(self.0.iter().map(|c| c * k).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rat::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::constant(Rat::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn divrem(&self, d: &Poly) -> (Poly, Poly) {
        let dd = d.degree().expect("division by zero polynomial");
        let lead = d.lead().unwrap().clone();
        let mut r = self.0.clone();
        if r.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut q = vec![Rat::zero(); r.len() - dd];
        for i in (dd..r.len()).rev() {
            if r[i].is_zero() {
                continue;
            }
            let f = &r[i] / &lead;
            for (j, c) in d.0.iter().enumerate() {
                r[i - dd + j] -= &f * c;
            }
            q[i - dd] = f;
        }
        r.truncate(dd);
        (Poly::new(q), Poly::new(r))
    }

    pub fn rem(&self, d: &Poly) -> Poly {
        self.divrem(d).1
    }

    pub fn monic(&self) -> Poly {
        match self.lead() {
            Some(l) => {
                let inv = l.recip();
                self.scale(&inv)
            }
            None => Poly::zero(),
        }
    }

    pub fn gcd(&self, o: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Returns `(g, s)` with `s·self ≡ g (mod m)` and `g = gcd(self, m)` monic.
    pub fn inverse_mod(&self, m: &Poly) -> (Poly, Poly) {
        let (mut r0, mut r1) = (m.clone(), self.rem(m));
        let (mut s0, mut s1) = (Poly::zero(), Poly::constant(Rat::one()));
        while !r1.is_zero() {
            let (q, r) = r0.divrem(&r1);
            let s = s0.sub(&q.mul(&s1));
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
        }
        let l = r0.lead().cloned().unwrap_or_else(Rat::one).recip();
        (r0.scale(&l), s0.scale(&l).rem(m))
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * rat_int(i as i64))
                .collect(),
        )
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Interval Horner evaluation over `[lo, hi]`; the result encloses the range.
    pub fn eval_interval(&self, lo: &Rat, hi: &Rat) -> (Rat, Rat) {
        let mut a = Rat::zero();
        let mut b = Rat::zero();
        for c in self.0.iter().rev() {
            let p = [&a * lo, &a * hi, &b * lo, &b * hi];
            let mn = p.iter().min().unwrap().clone();
            let mx = p.iter().max().unwrap().clone();
            a = mn + c;
            b = mx + c;
        }
        (a, b)
    }

    /// Number of distinct real roots in `(lo, hi]` by Sturm's theorem.
    pub fn count_roots(&self, lo: &Rat, hi: &Rat) -> usize {
        let mut seq = vec![self.clone(), self.derivative()];
        while !seq.last().unwrap().is_zero() {
            let n = seq.len();
            let r = seq[n - 2].rem(&seq[n - 1]).neg();
            seq.push(r);
        }
        seq.pop();
        let variations = |x: &Rat| {
            let signs: Vec<i8> = seq
                .iter()
                .map(|p| {
                    let v = p.eval(x);
                    if v.is_positive() {
                        1
                    } else if v.is_negative() {
                        -1
                    } else {
                        0
                    }
                })
                .filter(|&s| s != 0)
                .collect();
            signs.windows(2).filter(|w| w[0] != w[1]).count()
        };
        variations(lo).saturating_sub(variations(hi))
    }

    /// Renders with variable name `t`, in a form the expression parser accepts.
    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, c) in self.0.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = match i {
                0 => String::new(),
                1 => "t".into(),
                _ => format!("t^{i}"),
            };
            if mono.is_empty() {
                out.push_str(&fmt_rat(&mag));
            } else if mag.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{}*{}", fmt_rat(&mag), mono));
            }
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> Poly {
        Poly::new(c.iter().map(|&x| rat_int(x)).collect())
    }

    #[test]
    fn divrem_reconstructs() {
        let a = p(&[3, 0, 2, 5]);
        let d = p(&[-1, 1, 1]);
        let (q, r) = a.divrem(&d);
        assert_eq!(q.mul(&d).add(&r), a);
        assert!(r.degree().unwrap_or(0) < 2);
    }

    #[test]
    fn sturm_counts_golden_roots() {
        let m = p(&[-1, 1, 1]);
        assert_eq!(m.count_roots(&rat(1, 2), &rat(2, 3)), 1);
        assert_eq!(m.count_roots(&rat_int(-3), &rat_int(3)), 2);
        assert_eq!(m.count_roots(&rat_int(1), &rat_int(3)), 0);
    }

    #[test]
    fn inverse_mod_golden() {
        let m = p(&[-1, 1, 1]);
        let (g, s) = Poly::var().inverse_mod(&m);
        assert_eq!(g, p(&[1]));
        assert_eq!(s, p(&[1, 1]));
    }

    #[test]
    fn render_round_trip_shape() {
        assert_eq!(p(&[-1, 1, 1]).render(), "-1 + t + t^2");
        assert_eq!(Poly::new(vec![rat(1, 3), rat(-2, 5)]).render(), "1/3 - 2/5*t");
    }

    #[test]
    fn ln_of_huge_rational() {
        let big = BigInt::from(3).pow(2000u32);
        let r = Rat::new(BigInt::one(), big);
        assert!((ln_rat(&r) + 2000.0 * 3f64.ln()).abs() < 1e-9);
    }
}
