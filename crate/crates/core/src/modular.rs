//! Arithmetic in `GF(p²) = 𝔽_p[i]/(i² + 1)` for `p = 2⁶¹ − 1`.
//!
//! Since `p ≡ 3 (mod 4)` this is a field containing the images of all
//! Gaussian rationals whose denominators avoid `p`. Evaluating a rational
//! function at random points of it is a Schwartz–Zippel zero test: a nonzero
//! numerator of degree `d` vanishes at a random point with probability at
//! most `d / p`.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::rational::Cx;

pub const P: u64 = (1 << 61) - 1;

#[inline]
pub fn mul_mod(a: u64, b: u64) -> u64 {
    let t = a as u128 * b as u128;
    let r = (t as u64 & P) + (t >> 61) as u64;
    if r >= P { r - P } else { r }
}

pub fn pow_mod(mut a: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a);
        }
        a = mul_mod(a, a);
        e >>= 1;
    }
    acc
}

pub fn inv_mod(a: u64) -> u64 {
    pow_mod(a, P - 2)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Gf {
    pub re: u64,
    pub im: u64,
}

impl Gf {
    pub const ZERO: Gf = Gf { re: 0, im: 0 };
    pub const ONE: Gf = Gf { re: 1, im: 0 };

    pub fn from_cx(c: &Cx) -> Option<Gf> {
        Some(Gf { re: c.re.residue(P)?, im: c.im.residue(P)? })
    }

    pub fn random<R: Rng>(rng: &mut R) -> Gf {
        Gf { re: rng.random_range(0..P), im: rng.random_range(0..P) }
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    /// `None` for zero.
    pub fn inv(self) -> Option<Gf> {
        // (a + bi)⁻¹ = (a − bi) / (a² + b²); a² + b² ≠ 0 because −1 is a non-residue.
        let n = (mul_mod(self.re, self.re) + mul_mod(self.im, self.im)) % P;
        if n == 0 {
            return None;
        }
        let ni = inv_mod(n);
        Some(Gf { re: mul_mod(self.re, ni), im: mul_mod((P - self.im) % P, ni) })
    }
}

impl Add for Gf {
    type Output = Gf;
    fn add(self, o: Gf) -> Gf {
        Gf { re: (self.re + o.re) % P, im: (self.im + o.im) % P }
    }
}

impl Sub for Gf {
    type Output = Gf;
    fn sub(self, o: Gf) -> Gf {
        Gf { re: (self.re + P - o.re) % P, im: (self.im + P - o.im) % P }
    }
}

impl Neg for Gf {
    type Output = Gf;
    fn neg(self) -> Gf {
        Gf::ZERO - self
    }
}

impl Mul for Gf {
    type Output = Gf;
    fn mul(self, o: Gf) -> Gf {
        let rr = mul_mod(self.re, o.re);
        let ii = mul_mod(self.im, o.im);
        let ri = mul_mod(self.re, o.im);
        let ir = mul_mod(self.im, o.re);
        Gf { re: (rr + P - ii) % P, im: (ri + ir) % P }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;

    #[test]
    fn field_laws() {
        let mut rng = crate::sampling::stream(3, 0);
        for _ in 0..200 {
            let a = Gf::random(&mut rng);
            let b = Gf::random(&mut rng);
            assert_eq!(a * b, b * a);
            assert_eq!((a + b) - b, a);
            if !a.is_zero() {
                assert_eq!(a * a.inv().unwrap(), Gf::ONE);
            }
        }
        let i = Gf::from_cx(&Cx::i()).unwrap();
        assert_eq!(i * i, -Gf::ONE);
    }

    #[test]
    fn rational_images() {
        let half = Gf::from_cx(&Cx::real(Rational::new(1, 2))).unwrap();
        assert_eq!(half + half, Gf::ONE);
        let third = Gf::from_cx(&Cx::real(Rational::new(-1, 3))).unwrap();
        assert_eq!(third * Gf::from_cx(&Cx::int(-3)).unwrap(), Gf::ONE);
        let big = &Rational::new(1 << 62, 3) * &Rational::new(1 << 40, 7);
        let g = Gf::from_cx(&Cx::real(big)).unwrap();
        let back = g * Gf::from_cx(&Cx::int(21)).unwrap();
        assert_eq!(back, Gf::from_cx(&Cx::int(1 << 62)).unwrap() * Gf::from_cx(&Cx::int(1 << 40)).unwrap());
    }
}
