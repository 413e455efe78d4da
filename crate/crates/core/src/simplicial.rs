//! Integer chains of ordered vertex tuples: boundary, barycentric
//! subdivision, the prism homotopy `T` and cones.
//!
//! The boundary sign starts at `(-1)^1` for the first face, and the boundary
//! of a one-vertex simplex is the zero chain.

use std::collections::BTreeMap;
use std::fmt;

use crate::rational::Rational;

/// Point of `ℝ^N` with exact coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex(pub Vec<Rational>);

impl Vertex {
    pub fn new(coords: Vec<Rational>) -> Self {
        Vertex(coords)
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Vertex(c.iter().map(|&v| Rational::from_int(v)).collect())
    }

    /// Signed unit vector `±e_{|j|}` for a 1-based signed index.
    pub fn unit(dim: usize, j: i32) -> Self {
        assert!(j != 0 && j.unsigned_abs() as usize <= dim);
        let mut c = vec![Rational::ZERO; dim];
        c[j.unsigned_abs() as usize - 1] = Rational::from_int(j.signum() as i64);
        Vertex(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Rational] {
        &self.0
    }

    pub fn dist_sqr(&self, other: &Vertex) -> Rational {
        let mut acc = Rational::ZERO;
        for (a, b) in self.0.iter().zip(&other.0) {
            let d = a - b;
            acc += &(&d * &d);
        }
        acc
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(Rational::to_f64).collect()
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Ordered vertex tuple.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Simplex(pub Vec<Vertex>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("face index {j} out of range for a {p}-simplex")]
    FaceIndex { j: usize, p: usize },
    #[error("chain mixes grades {0} and {1}")]
    MixedGrade(usize, usize),
    #[error("vertex dimension {got} does not match chain dimension {want}")]
    Dimension { got: usize, want: usize },
    #[error("empty simplex")]
    Empty,
}

impl Simplex {
    pub fn new(v: Vec<Vertex>) -> Self {
        Simplex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    /// Drops the `j`-th vertex (1-based).
    pub fn face(&self, j: usize) -> Simplex {
        let mut v = self.0.clone();
        v.remove(j - 1);
        Simplex(v)
    }

    pub fn barycenter(&self) -> Result<Vertex, ChainError> {
        let first = self.0.first().ok_or(ChainError::Empty)?;
        let mut acc = vec![Rational::ZERO; first.dim()];
        for v in &self.0 {
            for (a, c) in acc.iter_mut().zip(&v.0) {
                *a += c;
            }
        }
        let p = Rational::from_int(self.0.len() as i64);
        Ok(Vertex(acc.iter().map(|a| a / &p).collect()))
    }

    /// Maximum squared distance between two vertices.
    pub fn diameter_sqr(&self) -> Rational {
        let mut best = Rational::ZERO;
        for (i, a) in self.0.iter().enumerate() {
            for b in &self.0[i + 1..] {
                let d = a.dist_sqr(b);
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    /// True when the vertices are linearly independent over `ℚ`.
    pub fn is_independent(&self) -> bool {
        rank(&self.0.iter().map(|v| v.0.clone()).collect::<Vec<_>>()) == self.0.len()
    }

    pub fn has_repeated_vertex(&self) -> bool {
        let mut v = self.0.clone();
        v.sort();
        v.windows(2).any(|w| w[0] == w[1])
    }

    fn prepend(&self, head: &[Vertex]) -> Simplex {
        let mut v = head.to_vec();
        v.extend_from_slice(&self.0);
        Simplex(v)
    }
}

/// Rank of a list of rational row vectors by exact elimination.
pub fn rank(rows: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, piv);
        let inv = m[r][c].recip();
        for i in r + 1..m.len() {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] * &inv;
            for cc in c..cols {
                let t = &f * &m[r][cc];
                m[i][cc] -= &t;
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Finite integer combination of simplices of a single grade.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Chain {
    terms: BTreeMap<Simplex, i64>,
}

impl Chain {
    pub fn zero() -> Self {
        Chain::default()
    }

    pub fn simplex(s: Simplex) -> Self {
        Self::term(1, s)
    }

    pub fn term(c: i64, s: Simplex) -> Self {
        let mut out = Chain::zero();
        out.add_term(c, s);
        out
    }

    pub fn from_vertices(v: Vec<Vertex>) -> Self {
        Self::simplex(Simplex(v))
    }

    pub fn add_term(&mut self, c: i64, s: Simplex) {
        if c == 0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(s) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0 {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Simplex, i64)> {
        self.terms.iter().map(|(s, c)| (s, *c))
    }

    /// Common vertex count of all simplices, `None` for the zero chain.
    pub fn grade(&self) -> Result<Option<usize>, ChainError> {
        let mut g = None;
        for s in self.terms.keys() {
            match g {
                None => g = Some(s.len()),
                Some(p) if p != s.len() => return Err(ChainError::MixedGrade(p, s.len())),
                _ => {}
            }
        }
        Ok(g)
    }

    pub fn add(&self, other: &Chain) -> Chain {
        let mut out = self.clone();
        for (s, c) in other.terms() {
            out.add_term(c, s.clone());
        }
        out
    }

    pub fn sub(&self, other: &Chain) -> Chain {
        self.add(&other.scale(-1))
    }

    pub fn scale(&self, k: i64) -> Chain {
        if k == 0 {
            return Chain::zero();
        }
        Chain { terms: self.terms.iter().map(|(s, c)| (s.clone(), c * k)).collect() }
    }

    fn map_terms(&self, f: impl Fn(&Simplex) -> Chain) -> Chain {
        let mut out = Chain::zero();
        for (s, c) in self.terms() {
            for (t, d) in f(s).terms() {
                out.add_term(c * d, t.clone());
            }
        }
        out
    }

    /// `∂_j` applied termwise (1-based face index).
    pub fn face(&self, j: usize) -> Result<Chain, ChainError> {
        let p = self.grade()?.unwrap_or(0);
        if p == 0 {
            return Ok(Chain::zero());
        }
        if j == 0 || j > p {
            return Err(ChainError::FaceIndex { j, p });
        }
        Ok(self.map_terms(|s| Chain::simplex(s.face(j))))
    }

    /// `∂ = Σ_j (-1)^j ∂_j`; zero on one-vertex simplices.
    pub fn boundary(&self) -> Result<Chain, ChainError> {
        self.grade()?;
        Ok(self.map_terms(simplex_boundary))
    }

    /// Iterated first barycentric subdivision.
    pub fn subdivide(&self, m: usize) -> Result<Chain, ChainError> {
        self.grade()?;
        let mut c = self.clone();
        for _ in 0..m {
            c = c.map_terms(simplex_sd);
        }
        Ok(c)
    }

    /// Prism operator `T`; zero on one-vertex simplices.
    pub fn prism(&self) -> Result<Chain, ChainError> {
        self.grade()?;
        Ok(self.map_terms(simplex_prism))
    }

    /// Cone `[v, c]`: prepends `v` to every simplex.
    pub fn cone(&self, v: &Vertex) -> Result<Chain, ChainError> {
        for s in self.terms.keys() {
            if let Some(w) = s.0.first() {
                if w.dim() != v.dim() {
                    return Err(ChainError::Dimension { got: v.dim(), want: w.dim() });
                }
            }
        }
        Ok(self.map_terms(|s| Chain::simplex(s.prepend(std::slice::from_ref(v)))))
    }

    pub fn max_diameter_sqr(&self) -> Rational {
        self.terms.keys().map(Simplex::diameter_sqr).max().unwrap_or(Rational::ZERO)
    }
}

impl fmt::Debug for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (s, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}{:?}", s.0)?;
        }
        Ok(())
    }
}

fn simplex_boundary(s: &Simplex) -> Chain {
    let mut out = Chain::zero();
    if s.len() <= 1 {
        return out;
    }
    for j in 1..=s.len() {
        out.add_term(if j % 2 == 0 { 1 } else { -1 }, s.face(j));
    }
    out
}

/// Visits every face sequence `∂_{j_ℓ}⋯∂_{j_1}σ` with `1 ≤ j_i ≤ p-i+1`,
/// passing the barycenters along the way, the final face and `Σ j_i`.
fn face_flags(s: &Simplex, depth: usize, visit: &mut impl FnMut(&[Vertex], &Simplex, usize)) {
    fn go(
        cur: &Simplex,
        left: usize,
        bars: &mut Vec<Vertex>,
        jsum: usize,
        visit: &mut impl FnMut(&[Vertex], &Simplex, usize),
    ) {
        if left == 0 {
            visit(bars, cur, jsum);
            return;
        }
        for j in 1..=cur.len() {
            let f = cur.face(j);
            bars.push(f.barycenter().expect("nonempty face"));
            go(&f, left - 1, bars, jsum + j, visit);
            bars.pop();
        }
    }
    let mut bars = vec![s.barycenter().expect("nonempty simplex")];
    go(s, depth, &mut bars, 0, visit);
}

fn simplex_sd(s: &Simplex) -> Chain {
    let p = s.len();
    let mut out = Chain::zero();
    let outer = if (p + 1).is_multiple_of(2) { 1 } else { -1 };
    face_flags(s, p - 1, &mut |bars, _, jsum| {
        let sign = if jsum % 2 == 0 { outer } else { -outer };
        out.add_term(sign, Simplex(bars.to_vec()));
    });
    out
}

fn simplex_prism(s: &Simplex) -> Chain {
    let p = s.len();
    let mut out = Chain::zero();
    if p < 2 {
        return out;
    }
    let b = s.barycenter().expect("nonempty simplex");
    out.add_term(1, s.prepend(std::slice::from_ref(&b)));
    for l in 1..=p - 2 {
        face_flags(s, l, &mut |bars, last, jsum| {
            let sign = if jsum % 2 == 0 { 1 } else { -1 };
            out.add_term(sign, last.prepend(bars));
        });
    }
    out
}

/// Smallest `m ≤ max_m` with every simplex of `sd^m(σ)` of squared
/// diameter below `eps_sqr`, by exhaustive depth-first search. Branches are
/// accepted early once the contraction bound guarantees them, but the cost
/// still grows like `(p+1)!^m`; use [`contraction_depth`] for deep targets.
pub fn shrink_depth(s: &Simplex, eps_sqr: &Rational, max_m: usize) -> Option<usize> {
    let ratio_sqr = contraction_sqr(s);
    (0..=max_m).find(|&m| all_below(s, m, eps_sqr, &ratio_sqr))
}

/// `(p/(p+1))²` for a simplex with `p + 1` vertices.
fn contraction_sqr(s: &Simplex) -> Rational {
    let p = s.len().saturating_sub(1) as i64;
    Rational::new(p * p, (p + 1) * (p + 1))
}

/// Smallest `m` with `(p/(p+1))^{2m} · diam²(σ) < eps_sqr`: every simplex of
/// `sd^m(σ)` is then below the threshold, since one subdivision step
/// contracts diameters by at least `p/(p+1)`.
pub fn contraction_depth(s: &Simplex, eps_sqr: &Rational, max_m: usize) -> Option<usize> {
    let ratio_sqr = contraction_sqr(s);
    let mut bound = s.diameter_sqr();
    for m in 0..=max_m {
        if &bound < eps_sqr {
            return Some(m);
        }
        bound = &bound * &ratio_sqr;
    }
    None
}

/// Largest squared diameter met at depth `m` along `paths` random descents
/// through `sd^m(σ)` plus the greedy descent through the widest child.
pub fn sampled_max_diameter_sqr<R: rand::Rng>(s: &Simplex, m: usize, paths: usize, rng: &mut R) -> Rational {
    let mut best = Rational::ZERO;
    for path in 0..=paths {
        let mut cur = s.clone();
        for _ in 0..m {
            let kids: Vec<Simplex> = simplex_sd(&cur).terms().map(|(c, _)| c.clone()).collect();
            cur = if path == 0 {
                kids.into_iter().max_by(|a, b| a.diameter_sqr().cmp(&b.diameter_sqr())).expect("nonempty")
            } else {
                let i = rng.random_range(0..kids.len());
                kids[i].clone()
            };
        }
        best = best.max(cur.diameter_sqr());
    }
    best
}

fn all_below(s: &Simplex, left: usize, eps_sqr: &Rational, ratio_sqr: &Rational) -> bool {
    let d = s.diameter_sqr();
    if left == 0 {
        return &d < eps_sqr;
    }
    let mut bound = d;
    for _ in 0..left {
        bound = &bound * ratio_sqr;
    }
    if &bound < eps_sqr {
        return true;
    }
    simplex_sd(s).terms().all(|(c, _)| all_below(c, left - 1, eps_sqr, ratio_sqr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[i64]) -> Vertex {
        Vertex::from_ints(c)
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn boundary_examples() {
        let (a, b, c) = (v(&[1, 0, 0]), v(&[0, 1, 0]), v(&[0, 0, 1]));
        assert!(Chain::from_vertices(vec![a.clone()]).boundary().unwrap().is_zero());
        let d = Chain::from_vertices(vec![a.clone(), b.clone()]).boundary().unwrap();
        let want = Chain::from_vertices(vec![a.clone()]).sub(&Chain::from_vertices(vec![b.clone()]));
        assert_eq!(d, want);
        let dd = Chain::from_vertices(vec![a, b, c]).boundary().unwrap().boundary().unwrap();
        assert!(dd.is_zero());
    }

    #[test]
    fn barycenter_examples() {
        let s = Simplex(vec![v(&[0, 0]), v(&[2, 0]), v(&[0, 2])]);
        assert_eq!(s.barycenter().unwrap(), Vertex(vec![q(2, 3), q(2, 3)]));
        let s = Simplex(vec![v(&[0, 0]), v(&[2, 0])]);
        assert_eq!(s.barycenter().unwrap(), v(&[1, 0]));
        assert_eq!(Simplex(vec![v(&[5, 1])]).barycenter().unwrap(), v(&[5, 1]));
        assert_eq!(Simplex(vec![]).barycenter(), Err(ChainError::Empty));
    }

    #[test]
    fn subdivision_examples() {
        let (a, b) = (v(&[2, 0]), v(&[0, 2]));
        let m = v(&[1, 1]);
        assert_eq!(
            Chain::from_vertices(vec![a.clone()]).subdivide(1).unwrap(),
            Chain::from_vertices(vec![a.clone()])
        );
        let sd = Chain::from_vertices(vec![a.clone(), b.clone()]).subdivide(1).unwrap();
        let want = Chain::from_vertices(vec![m.clone(), b.clone()])
            .sub(&Chain::from_vertices(vec![m.clone(), a.clone()]));
        assert_eq!(sd, want);
        let s = Chain::from_vertices(vec![v(&[1, 0, 0, 0]), v(&[0, 1, 0, 0]), v(&[0, 0, 1, 0]), v(&[0, 0, 0, 1])]);
        assert_eq!(s.subdivide(1).unwrap().len(), 24);
        assert_eq!(s.subdivide(0).unwrap(), s);
    }

    #[test]
    fn prism_examples() {
        let (a, b) = (v(&[2, 0]), v(&[0, 2]));
        let m = v(&[1, 1]);
        assert!(Chain::from_vertices(vec![a.clone()]).prism().unwrap().is_zero());
        let ab = Chain::from_vertices(vec![a.clone(), b.clone()]);
        assert_eq!(ab.prism().unwrap(), Chain::from_vertices(vec![m, a.clone(), b.clone()]));
        let lhs = ab.prism().unwrap().boundary().unwrap().add(&ab.boundary().unwrap().prism().unwrap());
        assert_eq!(lhs, ab.subdivide(1).unwrap().sub(&ab));
    }

    #[test]
    fn cone_examples() {
        let (vv, a, b, c, d) = (v(&[9, 9]), v(&[1, 0]), v(&[0, 1]), v(&[1, 1]), v(&[2, 1]));
        let ch = Chain::term(2, Simplex(vec![a.clone(), b.clone()])).sub(&Chain::from_vertices(vec![c.clone(), d.clone()]));
        let want = Chain::term(2, Simplex(vec![vv.clone(), a, b])).sub(&Chain::from_vertices(vec![vv.clone(), c, d]));
        assert_eq!(ch.cone(&vv).unwrap(), want);
        assert!(Chain::zero().cone(&vv).unwrap().is_zero());
        assert!(ch.cone(&v(&[1])).is_err());
    }

    #[test]
    fn diameter_examples() {
        assert!(Simplex(vec![v(&[1, 2])]).diameter_sqr().is_zero());
        assert_eq!(Simplex(vec![v(&[0, 0]), v(&[3, 4])]).diameter_sqr(), Rational::from_int(25));
        let sd = Chain::from_vertices(vec![v(&[0, 0]), v(&[2, 0])]).subdivide(1).unwrap();
        assert_eq!(sd.max_diameter_sqr(), Rational::from_int(1));
    }

    #[test]
    fn errors() {
        let ch = Chain::from_vertices(vec![v(&[1, 0]), v(&[0, 1])]);
        assert_eq!(ch.face(3), Err(ChainError::FaceIndex { j: 3, p: 2 }));
        let mixed = ch.add(&Chain::from_vertices(vec![v(&[1, 0])]));
        assert!(matches!(mixed.boundary(), Err(ChainError::MixedGrade(..))));
    }

    #[test]
    fn shrinking_unit_triangle() {
        let s = Simplex(vec![v(&[1, 0, 0]), v(&[0, 1, 0]), v(&[0, 0, 1])]);
        let m = shrink_depth(&s, &q(1, 10), 6).unwrap();
        let c = Chain::simplex(s.clone()).subdivide(m).unwrap();
        assert!(c.max_diameter_sqr() < q(1, 10));
        let prev = Chain::simplex(s).subdivide(m - 1).unwrap();
        assert!(prev.max_diameter_sqr() >= q(1, 10));
    }
}
