//! Sparse polynomials over Gaussian rationals in `ζ, ζ̄, z, z̄`.
//!
//! A monomial packs sixteen 8-bit exponents into a `u128`; this caps the
//! complex dimension at [`MAX_N`]. Byte `j` holds the exponent of `ζ_j`,
//! `4 + j` of `ζ̄_j`, `8 + j` of `z_j` and `12 + j` of `z̄_j`. In text the
//! source variable `ζ_j` is written `wj`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustc_hash::FxHashMap;

use crate::modular::Gf;
use crate::rational::{Cx, Rational};

/// Largest supported complex dimension.
pub const MAX_N: usize = 4;
/// Number of packed generators.
pub const NVARS: usize = 4 * MAX_N;

pub type Mono = u128;

/// A generator of the polynomial ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    W(usize),
    Wb(usize),
    Z(usize),
    Zb(usize),
}

impl Var {
    pub fn index(self) -> usize {
        match self {
            Var::W(j) => j,
            Var::Wb(j) => MAX_N + j,
            Var::Z(j) => 2 * MAX_N + j,
            Var::Zb(j) => 3 * MAX_N + j,
        }
    }

    pub fn from_index(i: usize) -> Var {
        let j = i % MAX_N;
        match i / MAX_N {
            0 => Var::W(j),
            1 => Var::Wb(j),
            2 => Var::Z(j),
            3 => Var::Zb(j),
            _ => panic!("variable index {i} out of range"),
        }
    }

    pub fn conj(self) -> Var {
        match self {
            Var::W(j) => Var::Wb(j),
            Var::Wb(j) => Var::W(j),
            Var::Z(j) => Var::Zb(j),
            Var::Zb(j) => Var::Z(j),
        }
    }

    pub fn is_antiholomorphic(self) -> bool {
        matches!(self, Var::Wb(_) | Var::Zb(_))
    }
}

#[inline]
pub fn mono_exp(m: Mono, v: usize) -> u8 {
    (m >> (8 * v)) as u8
}

#[inline]
pub fn mono_var(v: usize, e: u8) -> Mono {
    (e as u128) << (8 * v)
}

#[inline]
pub fn mono_degree(m: Mono) -> u32 {
    m.to_le_bytes().iter().map(|&b| b as u32).sum()
}

/// Applies a permutation of generator slots to a monomial.
fn mono_permute(m: Mono, perm: &[usize; NVARS]) -> Mono {
    let bytes = m.to_le_bytes();
    let mut out = [0u8; 16];
    for (v, &e) in bytes.iter().enumerate() {
        if e != 0 {
            out[perm[v]] = e;
        }
    }
    u128::from_le_bytes(out)
}

/// Sparse polynomial; terms sorted by monomial, no zero coefficients.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    terms: Vec<(Mono, Cx)>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Cx::ONE)
    }

    pub fn constant(c: Cx) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            Poly { terms: vec![(0, c)] }
        }
    }

    pub fn int(v: i64) -> Self {
        Self::constant(Cx::int(v))
    }

    pub fn rational(r: Rational) -> Self {
        Self::constant(Cx::real(r))
    }

    pub fn var(v: Var) -> Self {
        Poly { terms: vec![(mono_var(v.index(), 1), Cx::ONE)] }
    }

    /// Builds a polynomial from unsorted terms, merging duplicates.
    pub fn from_terms(it: impl IntoIterator<Item = (Mono, Cx)>) -> Self {
        let mut map: FxHashMap<Mono, Cx> = FxHashMap::default();
        for (m, c) in it {
            *map.entry(m).or_default() += &c;
        }
        Self::from_map(map)
    }

    fn from_map(map: FxHashMap<Mono, Cx>) -> Self {
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by_key(|t| t.0);
        Poly { terms }
    }

    pub fn terms(&self) -> &[(Mono, Cx)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Cx> {
        match self.terms.as_slice() {
            [] => Some(Cx::ZERO),
            [(0, c)] => Some(c.clone()),
            _ => None,
        }
    }

    /// Maximum total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| mono_degree(t.0)).max().unwrap_or(0)
    }

    /// Largest exponent of any single generator.
    /// Values at several points of `GF(p²)`, each given as per-slot power
    /// tables; `None` if a coefficient has no image.
    pub fn eval_gf(&self, points: &[Vec<Vec<Gf>>]) -> Option<Vec<Gf>> {
        let mut out = vec![Gf::ZERO; points.len()];
        for (m, c) in &self.terms {
            let c = Gf::from_cx(c)?;
            let bytes = m.to_le_bytes();
            for (o, pt) in out.iter_mut().zip(points) {
                let mut t = c;
                for (v, &e) in bytes.iter().enumerate() {
                    if e != 0 {
                        t = t * pt[v][e as usize];
                    }
                }
                *o = *o + t;
            }
        }
        Some(out)
    }

    pub fn max_var_exp(&self) -> u8 {
        self.terms
            .iter()
            .flat_map(|t| t.0.to_le_bytes())
            .max()
            .unwrap_or(0)
    }

    pub fn depends_on(&self, v: Var) -> bool {
        let i = v.index();
        self.terms.iter().any(|t| mono_exp(t.0, i) != 0)
    }

    pub fn scale(&self, c: &Cx) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, a)| (*m, a * c)).collect() }
    }

    pub fn scale_rational(&self, r: &Rational) -> Poly {
        self.scale(&Cx::real(r.clone()))
    }

    fn merge(&self, other: &Poly, negate: bool) -> Poly {
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    let c = if negate { -&b[j].1 } else { b[j].1.clone() };
                    out.push((b[j].0, c));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = if negate { &a[i].1 - &b[j].1 } else { &a[i].1 + &b[j].1 };
                    if !c.is_zero() {
                        out.push((a[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        for t in &b[j..] {
            let c = if negate { -&t.1 } else { t.1.clone() };
            out.push((t.0, c));
        }
        Poly { terms: out }
    }

    pub fn add_assign_scaled(&mut self, other: &Poly, c: &Cx) {
        *self = &*self + &other.scale(c);
    }

    pub fn mul_poly(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        assert!(
            self.max_var_exp() as u32 + other.max_var_exp() as u32 <= u8::MAX as u32,
            "exponent overflow in polynomial product"
        );
        if self.len() == 1 || other.len() == 1 {
            let (s, o) = if self.len() == 1 { (self, other) } else { (other, self) };
            let (m0, c0) = &s.terms[0];
            return Poly { terms: o.terms.iter().map(|(m, c)| (m + m0, c * c0)).collect() };
        }
        let mut map: FxHashMap<Mono, Cx> =
            FxHashMap::with_capacity_and_hasher(self.len() * other.len() / 2 + 1, Default::default());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let p = ca * cb;
                match map.entry(ma + mb) {
                    std::collections::hash_map::Entry::Occupied(mut e) => *e.get_mut() += &p,
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(p);
                    }
                }
            }
        }
        Self::from_map(map)
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_poly(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_poly(&base);
            }
        }
        acc
    }

    /// Formal partial derivative in one generator (Wirtinger calculus).
    pub fn deriv(&self, v: Var) -> Poly {
        let i = v.index();
        let unit = mono_var(i, 1);
        let terms = self
            .terms
            .iter()
            .filter_map(|(m, c)| {
                let e = mono_exp(*m, i);
                (e > 0).then(|| (m - unit, c.scale(&Rational::from_int(e as i64))))
            })
            .collect();
        Poly { terms }
    }

    fn permuted(&self, perm: &[usize; NVARS], conj_coef: bool) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| {
            (mono_permute(*m, perm), if conj_coef { c.conj() } else { c.clone() })
        }))
    }

    /// Complex conjugate: swaps every generator with its conjugate.
    pub fn conj(&self) -> Poly {
        let mut perm = [0; NVARS];
        for (v, p) in perm.iter_mut().enumerate() {
            *p = Var::from_index(v).conj().index();
        }
        self.permuted(&perm, true)
    }

    /// Exchanges the roles of `ζ` and `z`.
    pub fn swap_wz(&self) -> Poly {
        let mut perm = [0; NVARS];
        for (v, p) in perm.iter_mut().enumerate() {
            *p = (v + 2 * MAX_N) % NVARS;
        }
        self.permuted(&perm, false)
    }

    /// Renames `z` generators to `ζ` generators; the input must not involve `ζ`.
    pub fn z_to_w(&self) -> Poly {
        debug_assert!((0..2 * MAX_N).all(|v| !self.depends_on(Var::from_index(v))));
        self.swap_wz()
    }

    /// Restricts to the diagonal `z = ζ`.
    pub fn diagonal(&self) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| {
            let lo = m & ((1u128 << 64) - 1);
            let hi = m >> 64;
            (lo + hi, c.clone())
        }))
    }

    /// Substitutes a polynomial for one generator.
    pub fn substitute(&self, v: Var, by: &Poly) -> Poly {
        let i = v.index();
        let mut out = Poly::zero();
        let mut powers = vec![Poly::one()];
        for (m, c) in &self.terms {
            let e = mono_exp(*m, i) as usize;
            while powers.len() <= e {
                let next = powers.last().unwrap().mul_poly(by);
                powers.push(next);
            }
            let rest = Poly { terms: vec![(m - mono_var(i, e as u8), c.clone())] };
            out = &out + &rest.mul_poly(&powers[e]);
        }
        out
    }

    /// Exact evaluation; `vals` is indexed by generator slot.
    pub fn eval_exact(&self, vals: &[Cx; NVARS]) -> Cx {
        let mut acc = Cx::ZERO;
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, val) in vals.iter().enumerate() {
                for _ in 0..mono_exp(*m, v) {
                    t = &t * val;
                }
            }
            acc += &t;
        }
        acc
    }

    pub fn eval(&self, vals: &[Complex64; NVARS]) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = c.to_c64();
                for (v, val) in vals.iter().enumerate() {
                    let e = mono_exp(*m, v);
                    if e > 0 {
                        t *= val.powu(e as u32);
                    }
                }
                t
            })
            .sum()
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly::new(self)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.merge(rhs, false)
    }
}
impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.merge(rhs, true)
    }
}
impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        self.mul_poly(rhs)
    }
}
impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect() }
    }
}
impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        &self + &rhs
    }
}
impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        &self - &rhs
    }
}
impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}
impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -&self
    }
}

fn var_name(v: usize) -> String {
    match Var::from_index(v) {
        Var::W(j) => format!("w{}", j + 1),
        Var::Wb(j) => format!("conj(w{})", j + 1),
        Var::Z(j) => format!("z{}", j + 1),
        Var::Zb(j) => format!("conj(z{})", j + 1),
    }
}

/// Prints in the same grammar [`parse_poly`] accepts.
impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg_real = c.is_real() && c.re.signum() < 0;
            let coef = if neg_real { Cx::real(c.re.abs()) } else { c.clone() };
            match (k, neg_real) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mut factors: Vec<String> = Vec::new();
            if *m == 0 || !coef.is_one() {
                factors.push(if coef.is_real() { coef.re.to_string() } else { coef.to_string() });
            }
            for v in 0..NVARS {
                match mono_exp(*m, v) {
                    0 => {}
                    1 => factors.push(var_name(v)),
                    e => factors.push(format!("{}^{e}", var_name(v))),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Table of generator powers at one numeric point.
pub struct PowerTable {
    stride: usize,
    pw: Vec<Complex64>,
}

impl PowerTable {
    pub fn new(vals: &[Complex64; NVARS], max_exp: usize) -> Self {
        let stride = max_exp + 1;
        let mut pw = vec![Complex64::new(1.0, 0.0); NVARS * stride];
        for (v, val) in vals.iter().enumerate() {
            for e in 1..stride {
                pw[v * stride + e] = pw[v * stride + e - 1] * val;
            }
        }
        PowerTable { stride, pw }
    }

    #[inline]
    fn get(&self, v: u8, e: u8) -> Complex64 {
        self.pw[v as usize * self.stride + e as usize]
    }

    pub fn max_exp(&self) -> usize {
        self.stride - 1
    }
}

/// Polynomial flattened for fast numeric evaluation.
#[derive(Clone, Debug, Default)]
pub struct CompiledPoly {
    coefs: Vec<Complex64>,
    ends: Vec<u32>,
    factors: Vec<(u8, u8)>,
    max_exp: u8,
}

impl CompiledPoly {
    pub fn new(p: &Poly) -> Self {
        let mut out = CompiledPoly { max_exp: p.max_var_exp(), ..Default::default() };
        for (m, c) in p.terms() {
            out.coefs.push(c.to_c64());
            for v in 0..NVARS {
                let e = mono_exp(*m, v);
                if e > 0 {
                    out.factors.push((v as u8, e));
                }
            }
            out.ends.push(out.factors.len() as u32);
        }
        out
    }

    pub fn max_exp(&self) -> usize {
        self.max_exp as usize
    }

    #[inline]
    pub fn eval(&self, t: &PowerTable) -> Complex64 {
        debug_assert!(self.max_exp() <= t.max_exp());
        let mut acc = Complex64::new(0.0, 0.0);
        let mut start = 0usize;
        for (c, &end) in self.coefs.iter().zip(&self.ends) {
            let mut term = *c;
            for &(v, e) in &self.factors[start..end as usize] {
                term *= t.get(v, e);
            }
            acc += term;
            start = end as usize;
        }
        acc
    }
}

/// Packs numeric `ζ` and `z` into the generator layout, conjugates included.
pub fn point_values(zeta: &[Complex64], z: &[Complex64]) -> [Complex64; NVARS] {
    let mut vals = [Complex64::new(0.0, 0.0); NVARS];
    for (j, w) in zeta.iter().enumerate() {
        vals[Var::W(j).index()] = *w;
        vals[Var::Wb(j).index()] = w.conj();
    }
    for (j, w) in z.iter().enumerate() {
        vals[Var::Z(j).index()] = *w;
        vals[Var::Zb(j).index()] = w.conj();
    }
    vals
}

/// Exact analogue of [`point_values`].
pub fn point_values_exact(zeta: &[Cx], z: &[Cx]) -> [Cx; NVARS] {
    let mut vals: [Cx; NVARS] = Default::default();
    for (j, w) in zeta.iter().enumerate() {
        vals[Var::W(j).index()] = w.clone();
        vals[Var::Wb(j).index()] = w.conj();
    }
    for (j, w) in z.iter().enumerate() {
        vals[Var::Z(j).index()] = w.clone();
        vals[Var::Zb(j).index()] = w.conj();
    }
    vals
}

/// Text-grammar error with 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

/// Parses a polynomial in `z1..zn`, `w1..wn`, `conj(..)`, `i` and integer
/// literals combined with `+ - * / ^` and parentheses.
pub fn parse_poly(src: &str, n: usize) -> Result<Poly, ParseError> {
    parse_poly_at(src, n, 1, 1)
}

/// As [`parse_poly`], reporting positions relative to `(line, col)`.
pub fn parse_poly_at(src: &str, n: usize, line: usize, col: usize) -> Result<Poly, ParseError> {
    let mut p = Parser { chars: src.chars().collect(), pos: 0, n, line, col0: col };
    p.skip_ws();
    if p.at_end() {
        return Err(p.err("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.err(&format!("unexpected '{}'", p.chars[p.pos])));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    n: usize,
    line: usize,
    col0: usize,
}

impl Parser {
    fn err(&self, msg: &str) -> ParseError {
        ParseError { line: self.line, col: self.col0 + self.pos, msg: msg.to_string() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while !self.at_end() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some('-') => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = &acc * &self.unary()?;
                }
                Some('/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let d = self.unary()?;
                    match d.as_constant() {
                        Some(c) if !c.is_zero() => acc = acc.scale(&c.recip()),
                        Some(_) => {
                            self.pos = at;
                            return Err(self.err("division by zero"));
                        }
                        None => {
                            self.pos = at;
                            return Err(self.err("divisor must be a constant"));
                        }
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Poly, ParseError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-&self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            self.skip_ws();
            let e = self.integer()?;
            let e = u32::try_from(e).ok().filter(|&e| e <= 64).ok_or_else(|| self.err("exponent too large"))?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        let start = self.pos;
        while !self.at_end() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse::<i64>().map_err(|_| {
            self.pos = start;
            self.err("integer literal out of range")
        })
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while !self.at_end() && self.chars[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn atom(&mut self) -> Result<Poly, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => Ok(Poly::int(self.integer()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let id = self.ident();
                if id == "i" {
                    return Ok(Poly::constant(Cx::i()));
                }
                if id == "conj" {
                    self.expect('(')?;
                    let e = self.expr()?;
                    self.expect(')')?;
                    return Ok(e.conj());
                }
                let (head, idx) = id.split_at(1);
                let j = idx.parse::<usize>().ok().filter(|&j| j >= 1 && j <= self.n);
                match (head, j) {
                    ("z", Some(j)) => Ok(Poly::var(Var::Z(j - 1))),
                    ("w", Some(j)) => Ok(Poly::var(Var::W(j - 1))),
                    _ => {
                        self.pos = start;
                        Err(self.err(&format!("unknown identifier '{id}'")))
                    }
                }
            }
            Some(c) => Err(self.err(&format!("unexpected '{c}'"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Poly {
        parse_poly(s, 4).unwrap()
    }

    #[test]
    fn parse_print_roundtrip() {
        let a = p("z3 + conj(z3) + z1*conj(z1) - 3/2*z2^2*conj(w1) + (1+2*i)*w4");
        let b = p(&a.to_string());
        assert_eq!(a, b);
    }

    #[test]
    fn conj_and_derivatives() {
        let a = p("z1*conj(z1)^2 + i*z2");
        assert_eq!(a.conj(), p("conj(z1)*z1^2 - i*conj(z2)"));
        assert_eq!(a.deriv(Var::Zb(0)), p("2*z1*conj(z1)"));
        assert_eq!(a.deriv(Var::Z(1)), p("i"));
    }

    #[test]
    fn swap_and_diagonal() {
        let a = p("z1*conj(w2)");
        assert_eq!(a.swap_wz(), p("w1*conj(z2)"));
        assert_eq!(p("(w1 - z1)*conj(w1)").diagonal(), Poly::zero());
        assert_eq!(p("w1*z1").diagonal(), p("w1^2"));
    }

    #[test]
    fn parse_errors_have_columns() {
        let e = parse_poly("z1 + q2", 3).unwrap_err();
        assert_eq!((e.line, e.col), (1, 6));
        let e = parse_poly("z1 / z2", 3).unwrap_err();
        assert!(e.msg.contains("constant"));
        assert!(parse_poly("z4", 3).is_err());
    }

    #[test]
    fn compiled_matches_direct() {
        let a = p("z1^2*conj(w2) - 5/3*w1*conj(z1)^3 + i");
        let zeta = [Complex64::new(0.3, -0.2), Complex64::new(-0.1, 0.7)];
        let z = [Complex64::new(0.5, 0.1), Complex64::new(0.2, 0.2)];
        let vals = point_values(&zeta, &z);
        let t = PowerTable::new(&vals, 3);
        let c = a.compile();
        assert!((c.eval(&t) - a.eval(&vals)).norm() < 1e-14);
    }

    #[test]
    fn substitute_matches_composition() {
        let a = p("z1^2 + z1*z2");
        let s = a.substitute(Var::Z(0), &p("z2 + 1"));
        assert_eq!(s, p("(z2+1)^2 + (z2+1)*z2"));
    }
}
