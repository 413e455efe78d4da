//! Exact rational and Gaussian-rational scalars.
//!
//! Values that fit in machine words stay on an `i64` fast path; anything
//! larger is promoted to a boxed [`BigRational`] and demoted again once it
//! fits. Symbolic kernel expansion spends most of its time here.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone)]
enum Repr {
    /// Reduced, denominator strictly positive.
    Small(i64, i64),
    /// Only used when the value does not fit `Small`.
    Big(Box<BigRational>),
}

/// Exact rational number.
#[derive(Clone)]
pub struct Rational(Repr);

impl Rational {
    pub const ZERO: Rational = Rational(Repr::Small(0, 1));
    pub const ONE: Rational = Rational(Repr::Small(1, 1));

    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_i128(num as i128, den as i128)
    }

    pub fn from_int(v: i64) -> Self {
        Rational(Repr::Small(v, 1))
    }

    fn from_i128(mut n: i128, mut d: i128) -> Self {
        if d < 0 {
            n = -n;
            d = -d;
        }
        let g = n.gcd(&d);
        if g > 1 {
            n /= g;
            d /= g;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(a), Ok(b)) => Rational(Repr::Small(a, b)),
            _ => Rational(Repr::Big(Box::new(BigRational::new_raw(
                BigInt::from(n),
                BigInt::from(d),
            )))),
        }
    }

    fn from_big(r: BigRational) -> Self {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(a), Some(b)) => Rational(Repr::Small(a, b)),
            _ => Rational(Repr::Big(Box::new(r))),
        }
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self.0, Repr::Small(1, 1))
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(_, d) => *d == 1,
            Repr::Big(b) => b.is_integer(),
        }
    }

    pub fn signum(&self) -> i32 {
        match &self.0 {
            Repr::Small(n, _) => n.signum() as i32,
            Repr::Big(b) => {
                if b.is_positive() {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Self {
        match &self.0 {
            Repr::Small(n, d) => {
                assert!(*n != 0, "reciprocal of zero");
                Self::from_i128(*d as i128, *n as i128)
            }
            Repr::Big(b) => Self::from_big(b.recip()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(n, d) => *n as f64 / *d as f64,
            Repr::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Best rational approximation with denominator at most `max_den`.
    pub fn approximate(x: f64, max_den: i64) -> Self {
        assert!(x.is_finite());
        let sign = if x < 0.0 { -1 } else { 1 };
        let mut v = x.abs();
        let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
        for _ in 0..64 {
            let a = v.floor();
            let ai = a as i128;
            let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
            if q2 > max_den as i128 {
                break;
            }
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
            let frac = v - a;
            if frac < 1e-12 {
                break;
            }
            v = 1.0 / frac;
        }
        if q1 == 0 {
            return Self::ZERO;
        }
        Self::from_i128(sign * p1, q1)
    }

    /// Image in `ℤ/p`, or `None` when `p` divides the denominator.
    pub fn residue(&self, p: u64) -> Option<u64> {
        let (num, den) = match &self.0 {
            Repr::Small(a, b) => ((*a as i128).rem_euclid(p as i128) as u64, (*b as i128).rem_euclid(p as i128) as u64),
            Repr::Big(b) => {
                let m = BigInt::from(p);
                let r = |x: &BigInt| x.mod_floor(&m).to_u64().expect("reduced below p");
                (r(b.numer()), r(b.denom()))
            }
        };
        if den == 0 {
            return None;
        }
        Some(crate::modular::mul_mod(num, crate::modular::inv_mod(den)))
    }

    /// Numerator and denominator as big integers.
    pub fn parts(&self) -> (BigInt, BigInt) {
        let b = self.to_big();
        (b.numer().clone(), b.denom().clone())
    }
}

impl Default for Rational {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Self::from_int(v)
    }
}

impl PartialEq for Rational {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => a == c && b == d,
            (Repr::Big(x), Repr::Big(y)) => x == y,
            _ => false,
        }
    }
}
impl Eq for Rational {}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(a, b) => {
                0u8.hash(state);
                a.hash(state);
                b.hash(state);
            }
            Repr::Big(x) => {
                1u8.hash(state);
                x.hash(state);
            }
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128))
            }
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl Add for &Rational {
    type Output = Rational;
    fn add(self, rhs: &Rational) -> Rational {
        match (&self.0, &rhs.0) {
            (Repr::Small(a, 1), Repr::Small(c, 1)) => match a.checked_add(*c) {
                Some(s) => Rational(Repr::Small(s, 1)),
                None => Rational::from_i128(*a as i128 + *c as i128, 1),
            },
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
                match (a * d).checked_add(c * b) {
                    Some(n) => Rational::from_i128(n, b * d),
                    None => Rational::from_big(self.to_big() + rhs.to_big()),
                }
            }
            _ => Rational::from_big(self.to_big() + rhs.to_big()),
        }
    }
}

impl Mul for &Rational {
    type Output = Rational;
    fn mul(self, rhs: &Rational) -> Rational {
        match (&self.0, &rhs.0) {
            (Repr::Small(a, 1), Repr::Small(c, 1)) => match a.checked_mul(*c) {
                Some(p) => Rational(Repr::Small(p, 1)),
                None => Rational::from_i128(*a as i128 * *c as i128, 1),
            },
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                Rational::from_i128(*a as i128 * *c as i128, *b as i128 * *d as i128)
            }
            _ => Rational::from_big(self.to_big() * rhs.to_big()),
        }
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match self.0 {
            Repr::Small(a, b) => match a.checked_neg() {
                Some(n) => Rational(Repr::Small(n, b)),
                None => Rational::from_i128(-(a as i128), b as i128),
            },
            Repr::Big(x) => Rational::from_big(-*x),
        }
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -self.clone()
    }
}

impl Sub for &Rational {
    type Output = Rational;
    fn sub(self, rhs: &Rational) -> Rational {
        self + &(-rhs)
    }
}

impl Div for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        self * &rhs.recip()
    }
}

macro_rules! forward_owned {
    ($t:ty, $($tr:ident $m:ident),*) => {$(
        impl $tr for $t {
            type Output = $t;
            fn $m(self, rhs: $t) -> $t { (&self).$m(&rhs) }
        }
        impl $tr<&$t> for $t {
            type Output = $t;
            fn $m(self, rhs: &$t) -> $t { (&self).$m(rhs) }
        }
    )*};
}
forward_owned!(Rational, Add add, Sub sub, Mul mul, Div div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        *self = &*self + rhs;
    }
}
impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        *self = &*self - rhs;
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{n}"),
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(b) if b.is_integer() => write!(f, "{}", b.numer()),
            Repr::Big(b) => write!(f, "{}/{}", b.numer(), b.denom()),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Exact Gaussian rational `re + i·im`.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Cx {
    pub re: Rational,
    pub im: Rational,
}

impl Cx {
    pub const ZERO: Cx = Cx { re: Rational::ZERO, im: Rational::ZERO };
    pub const ONE: Cx = Cx { re: Rational::ONE, im: Rational::ZERO };

    pub fn new(re: Rational, im: Rational) -> Self {
        Cx { re, im }
    }

    pub fn real(re: Rational) -> Self {
        Cx { re, im: Rational::ZERO }
    }

    pub fn int(v: i64) -> Self {
        Self::real(Rational::from_int(v))
    }

    pub fn i() -> Self {
        Cx { re: Rational::ZERO, im: Rational::ONE }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Cx { re: self.re.clone(), im: -&self.im }
    }

    pub fn norm_sqr(&self) -> Rational {
        &(&self.re * &self.re) + &(&self.im * &self.im)
    }

    pub fn recip(&self) -> Self {
        let n = self.norm_sqr();
        Cx { re: &self.re / &n, im: -(&self.im / &n) }
    }

    pub fn scale(&self, r: &Rational) -> Self {
        Cx { re: &self.re * r, im: &self.im * r }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn approximate(z: Complex64, max_den: i64) -> Self {
        Cx {
            re: Rational::approximate(z.re, max_den),
            im: Rational::approximate(z.im, max_den),
        }
    }

    /// Sign used to normalise printed terms: sign of the first nonzero part.
    pub fn leading_sign(&self) -> i32 {
        if !self.re.is_zero() {
            self.re.signum()
        } else {
            self.im.signum()
        }
    }
}

impl From<Rational> for Cx {
    fn from(r: Rational) -> Self {
        Cx::real(r)
    }
}

impl Add for &Cx {
    type Output = Cx;
    fn add(self, rhs: &Cx) -> Cx {
        Cx { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub for &Cx {
    type Output = Cx;
    fn sub(self, rhs: &Cx) -> Cx {
        Cx { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Mul for &Cx {
    type Output = Cx;
    fn mul(self, rhs: &Cx) -> Cx {
        if self.im.is_zero() && rhs.im.is_zero() {
            return Cx::real(&self.re * &rhs.re);
        }
        Cx {
            re: &(&self.re * &rhs.re) - &(&self.im * &rhs.im),
            im: &(&self.re * &rhs.im) + &(&self.im * &rhs.re),
        }
    }
}

impl Div for &Cx {
    type Output = Cx;
    fn div(self, rhs: &Cx) -> Cx {
        self * &rhs.recip()
    }
}

forward_owned!(Cx, Add add, Sub sub, Mul mul, Div div);

impl Neg for &Cx {
    type Output = Cx;
    fn neg(self) -> Cx {
        Cx { re: -&self.re, im: -&self.im }
    }
}
impl Neg for Cx {
    type Output = Cx;
    fn neg(self) -> Cx {
        -&self
    }
}

impl AddAssign<&Cx> for Cx {
    fn add_assign(&mut self, rhs: &Cx) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}
impl SubAssign<&Cx> for Cx {
    fn sub_assign(&mut self, rhs: &Cx) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl fmt::Display for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "({})*i", self.im),
            (false, false) => write!(f, "({} + ({})*i)", self.re, self.im),
        }
    }
}

impl fmt::Debug for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Zero for Rational {
    fn zero() -> Self {
        Self::ZERO
    }
    fn is_zero(&self) -> bool {
        Rational::is_zero(self)
    }
}
impl One for Rational {
    fn one() -> Self {
        Self::ONE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_arithmetic_reduces() {
        let a = Rational::new(2, 4);
        assert_eq!(a, Rational::new(1, 2));
        assert_eq!(&a + &Rational::new(1, 3), Rational::new(5, 6));
        assert_eq!(&a * &Rational::new(-4, 3), Rational::new(-2, 3));
        assert_eq!(Rational::new(3, -6), Rational::new(-1, 2));
    }

    #[test]
    fn promotes_and_demotes() {
        let big = Rational::from_int(i64::MAX);
        let sq = &big * &big;
        assert!(matches!(sq.0, Repr::Big(_)));
        let back = &sq / &big;
        assert_eq!(back, big);
        assert!(matches!(back.0, Repr::Small(..)));
        let s = &sq - &sq;
        assert!(s.is_zero());
    }

    #[test]
    fn gaussian_ops() {
        let z = Cx::new(Rational::new(1, 2), Rational::from_int(3));
        let w = &z * &z.recip();
        assert!(w.is_one());
        assert_eq!(&z * &z.conj(), Cx::real(z.norm_sqr()));
    }

    #[test]
    fn approximation_recovers_simple_fractions() {
        assert_eq!(Rational::approximate(0.75, 1024), Rational::new(3, 4));
        assert_eq!(Rational::approximate(-1.0 / 3.0, 1024), Rational::new(-1, 3));
        assert_eq!(Rational::approximate(1e-17, 1024), Rational::ZERO);
    }
}
