//! Elements of the eighth cyclotomic field ℚ(ζ), ζ = exp(iπ/4).
//!
//! Every value is stored as `c0 + c1·ζ + c2·ζ² + c3·ζ³` with rational
//! coefficients; `ζ⁴ = −1` keeps that representation canonical, so equality
//! is plain coefficient equality.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Rational;
use crate::error::ParseError;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct CycNum {
    c: [Rational; 4],
}

const SUPERSCRIPTS: [&str; 4] = ["", "ζ", "ζ²", "ζ³"];

impl CycNum {
    pub fn new(c0: Rational, c1: Rational, c2: Rational, c3: Rational) -> Self {
        CycNum { c: [c0, c1, c2, c3] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::one())
    }

    pub fn from_rational(r: Rational) -> Self {
        CycNum { c: [r, Rational::zero(), Rational::zero(), Rational::zero()] }
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(Rational::from_integer(n))
    }

    /// `coeff · ζ^power`, power taken mod 8.
    pub fn monomial(coeff: Rational, power: i64) -> Self {
        let p = power.rem_euclid(8) as usize;
        let mut out = Self::zero();
        if p < 4 {
            out.c[p] = coeff;
        } else {
            out.c[p - 4] = -coeff;
        }
        out
    }

    /// exp(ikπ/4).
    pub fn phase(k: i64) -> Self {
        Self::monomial(Rational::one(), k)
    }

    /// The primitive root ζ itself.
    pub fn zeta() -> Self {
        Self::phase(1)
    }

    pub fn i() -> Self {
        Self::phase(2)
    }

    /// √2 = ζ − ζ³.
    pub fn sqrt2() -> Self {
        CycNum::new(Rational::zero(), Rational::one(), Rational::zero(), Rational::from_integer(-1))
    }

    /// 1/√2 = (ζ − ζ³)/2.
    pub fn inv_sqrt2() -> Self {
        CycNum::new(Rational::zero(), Rational::new(1, 2), Rational::zero(), Rational::new(-1, 2))
    }

    pub fn coeffs(&self) -> &[Rational; 4] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Rational::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.c[0].is_one() && self.c[1..].iter().all(Rational::is_zero)
    }

    /// True when the value is real, i.e. of the form `a + b√2`.
    pub fn is_real(&self) -> bool {
        self.c[2].is_zero() && self.c[1] == -&self.c[3]
    }

    /// Complex conjugate: ζ ↦ ζ⁻¹ = −ζ³.
    pub fn conj(&self) -> Self {
        self.galois(7)
    }

    /// The automorphism ζ ↦ ζ^k for odd `k`.
    pub fn galois(&self, k: i64) -> Self {
        debug_assert!(k.rem_euclid(2) == 1, "Galois automorphisms need odd k");
        let mut out = Self::zero();
        for (j, cj) in self.c.iter().enumerate() {
            if cj.is_zero() {
                continue;
            }
            let p = (j as i64 * k).rem_euclid(8) as usize;
            if p < 4 {
                out.c[p] = &out.c[p] + cj;
            } else {
                out.c[p - 4] = &out.c[p - 4] - cj;
            }
        }
        out
    }

    /// Field norm down to ℚ: the product of all four Galois conjugates.
    pub fn norm(&self) -> Rational {
        let prod = self * &self.galois(3) * &self.galois(5) * &self.galois(7);
        debug_assert!(prod.c[1..].iter().all(Rational::is_zero));
        prod.c[0].clone()
    }

    /// `|a|²` as a real field element.
    pub fn abs_sq(&self) -> Self {
        self * &self.conj()
    }

    pub fn inv(&self) -> Option<Self> {
        let n = self.norm().recip()?;
        let adj = self.galois(3) * &self.galois(5) * &self.galois(7);
        Some(adj.scale(&n))
    }

    pub fn scale(&self, r: &Rational) -> Self {
        CycNum { c: [&self.c[0] * r, &self.c[1] * r, &self.c[2] * r, &self.c[3] * r] }
    }

    /// Multiplication by ζ^k, which only permutes and negates coefficients.
    pub fn rotate(&self, k: i64) -> Self {
        let mut out = Self::zero();
        for (j, cj) in self.c.iter().enumerate() {
            let p = (j as i64 + k).rem_euclid(8) as usize;
            out.c[p % 4] = if p < 4 { cj.clone() } else { -cj };
        }
        out
    }

    pub fn to_complex(&self) -> Complex64 {
        let mut z = Complex64::new(0.0, 0.0);
        for (j, cj) in self.c.iter().enumerate() {
            if cj.is_zero() {
                continue;
            }
            z += Complex64::from_polar(1.0, j as f64 * std::f64::consts::FRAC_PI_4) * cj.to_f64();
        }
        z
    }

    /// The "(c0) + (c1)ζ + (c2)ζ² + (c3)ζ³" rendering used in logs and golden files.
    pub fn full_form(&self) -> String {
        format!("({}) + ({})ζ + ({})ζ² + ({})ζ³", self.c[0], self.c[1], self.c[2], self.c[3])
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        let mut out = Self::zero();
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.c.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let prod = a * b;
                let k = i + j;
                if k < 4 {
                    out.c[k] = &out.c[k] + &prod;
                } else {
                    out.c[k - 4] = &out.c[k - 4] - &prod;
                }
            }
        }
        out
    }

    fn add_ref(&self, rhs: &Self) -> Self {
        CycNum { c: [&self.c[0] + &rhs.c[0], &self.c[1] + &rhs.c[1], &self.c[2] + &rhs.c[2], &self.c[3] + &rhs.c[3]] }
    }
}

impl From<i64> for CycNum {
    fn from(n: i64) -> Self {
        Self::from_integer(n)
    }
}

impl From<Rational> for CycNum {
    fn from(r: Rational) -> Self {
        Self::from_rational(r)
    }
}

impl Neg for &CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        CycNum { c: [-&self.c[0], -&self.c[1], -&self.c[2], -&self.c[3]] }
    }
}

impl Neg for CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        -&self
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&CycNum> for &CycNum {
            type Output = CycNum;
            fn $method(self, rhs: &CycNum) -> CycNum {
                $body(self, rhs)
            }
        }
        impl $tr<CycNum> for CycNum {
            type Output = CycNum;
            fn $method(self, rhs: CycNum) -> CycNum {
                $body(&self, &rhs)
            }
        }
        impl $tr<&CycNum> for CycNum {
            type Output = CycNum;
            fn $method(self, rhs: &CycNum) -> CycNum {
                $body(&self, rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a: &CycNum, b: &CycNum| a.add_ref(b));
forward_binop!(Sub, sub, |a: &CycNum, b: &CycNum| a.add_ref(&-b));
forward_binop!(Mul, mul, |a: &CycNum, b: &CycNum| a.mul_ref(b));

impl AddAssign<&CycNum> for CycNum {
    fn add_assign(&mut self, rhs: &CycNum) {
        for k in 0..4 {
            if !rhs.c[k].is_zero() {
                self.c[k] = &self.c[k] + &rhs.c[k];
            }
        }
    }
}

/// Compact rendering: nonzero monomials only, e.g. `1/2ζ - 1/2ζ³`, `-1`, `ζ²`.
impl fmt::Display for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if f.alternate() {
            return f.write_str(&self.full_form());
        }
        let mut first = true;
        for (k, ck) in self.c.iter().enumerate() {
            if ck.is_zero() {
                continue;
            }
            let neg = ck.is_negative();
            let mag = ck.abs();
            if first {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            first = false;
            if k == 0 || !mag.is_one() {
                write!(f, "{mag}")?;
            }
            f.write_str(SUPERSCRIPTS[k])?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CycNum({self})")
    }
}

/// Parses both the compact and the full parenthesised forms. ASCII `z`,
/// `z^2`, `z^3` and `i` are accepted as aliases.
impl FromStr for CycNum {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(ParseError::new("empty cyclotomic number"));
        }
        let mut terms = Vec::new();
        let mut depth = 0i32;
        let mut start = 0usize;
        for (idx, ch) in compact.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                '+' | '-' if depth == 0 && idx > start => {
                    terms.push(&compact[start..idx]);
                    start = idx;
                }
                _ => {}
            }
        }
        terms.push(&compact[start..]);

        let mut out = CycNum::zero();
        for raw in terms {
            let bad = || ParseError::new(format!("invalid cyclotomic term `{raw}` in `{s}`"));
            let (sign, body) = match raw.as_bytes().first() {
                Some(b'+') => (1, &raw[1..]),
                Some(b'-') => (-1, &raw[1..]),
                _ => (1, raw),
            };
            let (coeff_str, power) = split_power(body).ok_or_else(bad)?;
            let coeff_str = coeff_str.strip_prefix('(').and_then(|c| c.strip_suffix(')')).unwrap_or(coeff_str);
            let coeff = if coeff_str.is_empty() {
                if power == 0 {
                    return Err(bad());
                }
                Rational::one()
            } else {
                coeff_str.parse::<Rational>().map_err(|_| bad())?
            };
            let coeff = if sign < 0 { -coeff } else { coeff };
            out += &CycNum::monomial(coeff, power);
        }
        Ok(out)
    }
}

fn split_power(body: &str) -> Option<(&str, i64)> {
    const SUFFIXES: [(&str, i64); 8] =
        [("ζ³", 3), ("ζ²", 2), ("ζ", 1), ("z^3", 3), ("z^2", 2), ("z", 1), ("i", 2), ("", 0)];
    SUFFIXES.iter().find_map(|(suf, p)| body.strip_suffix(suf).map(|rest| (rest, *p)))
}

impl Serialize for CycNum {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CycNum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
