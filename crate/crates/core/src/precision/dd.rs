//! Double-double arithmetic.
//!
//! A value is the unevaluated sum `hi + lo` of two `f64` with
//! `|lo| <= ulp(hi) / 2`. Addition and multiplication follow the accurate
//! variants of the QD library (Hida, Li, Bailey).

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Default, Debug)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline(always)]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[cfg(target_feature = "fma")]
#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[cfg(not(target_feature = "fma"))]
#[inline(always)]
fn split(a: f64) -> (f64, f64) {
    const SPLITTER: f64 = 134217729.0; // 2^27 + 1
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[cfg(not(target_feature = "fma"))]
#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, err)
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };
    pub const PI: DoubleDouble = DoubleDouble {
        hi: std::f64::consts::PI,
        lo: 1.2246467991473532e-16,
    };
    const TWO_PI: DoubleDouble = DoubleDouble {
        hi: std::f64::consts::TAU,
        lo: 2.4492935982947064e-16,
    };
    const HALF_PI: DoubleDouble = DoubleDouble {
        hi: std::f64::consts::FRAC_PI_2,
        lo: 6.123233995736766e-17,
    };

    /// Builds a normalized value from two components.
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            if self.hi == 0.0 {
                return Self::ZERO;
            }
            return DoubleDouble {
                hi: f64::NAN,
                lo: f64::NAN,
            };
        }
        let x = 1.0 / self.hi.sqrt();
        let y = self.hi * x;
        let (p, e) = two_prod(y, y);
        let diff = (self - DoubleDouble { hi: p, lo: e }).hi;
        let (hi, lo) = two_sum(y, diff * (x * 0.5));
        DoubleDouble { hi, lo }
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }

    fn round_nearest(self) -> Self {
        let hi = self.hi.round();
        if hi == self.hi {
            let lo = self.lo.round();
            DoubleDouble::new(hi, lo)
        } else if (hi - self.hi).abs() == 0.5 && self.lo != 0.0 {
            // tie on hi broken by the sign of lo
            if self.lo < 0.0 && hi > self.hi {
                DoubleDouble::from(hi - 1.0)
            } else if self.lo > 0.0 && hi < self.hi {
                DoubleDouble::from(hi + 1.0)
            } else {
                DoubleDouble::from(hi)
            }
        } else {
            DoubleDouble::from(hi)
        }
    }

    /// sin and cos of `t` with `|t| <= pi/4` by Taylor series.
    fn sin_cos_reduced(t: DoubleDouble) -> (DoubleDouble, DoubleDouble) {
        let t2 = t * t;
        let mut sin = t;
        let mut term = t;
        let mut k = 1.0;
        loop {
            term = -(term * t2) / DoubleDouble::from((k + 1.0) * (k + 2.0));
            k += 2.0;
            sin += term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        let mut cos = Self::ONE;
        let mut term = Self::ONE;
        let mut k = 0.0;
        loop {
            term = -(term * t2) / DoubleDouble::from((k + 1.0) * (k + 2.0));
            k += 2.0;
            cos += term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        (sin, cos)
    }

    fn reduce(self) -> (i64, DoubleDouble) {
        let k = (self / Self::TWO_PI).round_nearest();
        let r = self - k * Self::TWO_PI;
        let j = (r / Self::HALF_PI).round_nearest();
        let t = r - j * Self::HALF_PI;
        (j.hi as i64, t)
    }

    pub fn sin(self) -> Self {
        if self.hi == 0.0 {
            return Self::ZERO;
        }
        let (j, t) = self.reduce();
        let (s, c) = Self::sin_cos_reduced(t);
        match j.rem_euclid(4) {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        }
    }

    pub fn cos(self) -> Self {
        if self.hi == 0.0 {
            return Self::ONE;
        }
        let (j, t) = self.reduce();
        let (s, c) = Self::sin_cos_reduced(t);
        match j.rem_euclid(4) {
            0 => c,
            1 => -s,
            2 => -c,
            _ => s,
        }
    }

    /// Lossless text form: `hi` alone, or `hi` followed by a signed `lo`,
    /// both in shortest round-trip notation (e.g. `0.1+5.551115123125783e-18`).
    pub fn to_exact_string(self) -> String {
        if self.lo == 0.0 {
            format!("{:e}", self.hi)
        } else {
            format!("{:e}{:+e}", self.hi, self.lo)
        }
    }

    /// Inverse of [`DoubleDouble::to_exact_string`]; also accepts a plain `f64` literal.
    pub fn parse_exact(s: &str) -> Option<Self> {
        let s = s.trim();
        let bytes = s.as_bytes();
        // a sign that is neither leading nor part of an exponent separates hi from lo
        let split = (1..bytes.len()).find(|&i| {
            (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
        });
        match split {
            None => s.parse::<f64>().ok().map(DoubleDouble::from),
            Some(i) => {
                let hi = s[..i].parse::<f64>().ok()?;
                let lo = s[i..].parse::<f64>().ok()?;
                Some(DoubleDouble { hi, lo })
            }
        }
    }
}

impl From<f64> for DoubleDouble {
    #[inline]
    fn from(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        DoubleDouble { hi: q1, lo: q2 } + DoubleDouble::from(q3)
    }
}

macro_rules! assign_op {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr for DoubleDouble {
            #[inline]
            fn $method(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}

assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.*e}", p, self.hi),
            None => write!(f, "{:e}", self.hi),
        }
    }
}
