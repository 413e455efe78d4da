//! Exterior algebra on `ℂⁿ×ℂⁿ` with coefficients `P / ∏ Φ_i^{e_i}`, where
//! `P` is a [`Poly`] and the `Φ_i` are registered barrier polynomials.
//!
//! A wedge monomial is a `u16` bitmask over sixteen covector slots; slot
//! `4g + j` belongs to group `g` and index `j`. In the standard basis the
//! groups are `dζ, dζ̄, dz, dz̄`. The difference basis replaces `dζ_j` by
//! `θ_j = dζ_j − dz_j`, in which every Cauchy–Fantappié form is sparse.
//! Canonical order is increasing slot number.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::poly::{point_values, Poly, Var, MAX_N};
use crate::rational::Cx;

/// Above this estimated cost [`FormExpr::is_zero`] switches to modular
/// evaluation.
const EXACT_BUDGET: f64 = 4e6;
const MODULAR_TRIALS: usize = 3;

pub type Wedge = u16;
pub type BarrierId = u16;

/// Sorted `(barrier id, positive exponent)` pairs.
pub type Den = SmallVec<[(BarrierId, u16); 4]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Standard,
    Difference,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormError {
    #[error("registered barrier {0} differs from G·(ζ−z)")]
    BarrierMismatch(BarrierId),
    #[error("repeated Leray map in strict mode")]
    RepeatedMap,
    #[error("operands live in different bases or dimensions")]
    Mismatch,
    #[error("barrier {id} is {value:e} at the evaluation point")]
    Singular { id: BarrierId, value: f64 },
    #[error("dimension {0} outside the supported range 1..={MAX_N}")]
    Dimension(usize),
    #[error("section has {got} components, expected {want}")]
    SectionLength { got: usize, want: usize },
}

pub const GROUP_HOLO_ZETA: usize = 0;
pub const GROUP_ANTI_ZETA: usize = 1;
pub const GROUP_HOLO_Z: usize = 2;
pub const GROUP_ANTI_Z: usize = 3;

#[inline]
pub fn slot(group: usize, j: usize) -> usize {
    group * MAX_N + j
}

#[inline]
pub fn bit(group: usize, j: usize) -> Wedge {
    1 << slot(group, j)
}

#[inline]
pub fn group_mask(w: Wedge, group: usize) -> Wedge {
    (w >> (group * MAX_N)) & 0xf
}

#[inline]
pub fn group_count(w: Wedge, group: usize) -> u32 {
    group_mask(w, group).count_ones()
}

/// Sign of `a ∧ b` relative to the canonical monomial `a | b`, or `None`
/// when they share a covector.
#[inline]
pub fn wedge_sign(a: Wedge, b: Wedge) -> Option<i32> {
    if a & b != 0 {
        return None;
    }
    let mut inv = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        inv += (a >> j).count_ones();
        bb &= bb - 1;
    }
    Some(if inv.is_multiple_of(2) { 1 } else { -1 })
}

/// Sign of sorting a sequence of distinct slots into increasing order.
pub fn sort_sign(seq: &[usize]) -> i32 {
    let mut inv = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn wedge_name(w: Wedge, basis: Basis) -> String {
    if w == 0 {
        return "1".to_string();
    }
    let mut parts = Vec::new();
    for s in 0..16 {
        if w & (1 << s) != 0 {
            let (g, j) = (s / MAX_N, s % MAX_N + 1);
            parts.push(match (g, basis) {
                (0, Basis::Standard) => format!("dw{j}"),
                (0, Basis::Difference) => format!("dth{j}"),
                (1, _) => format!("dwb{j}"),
                (2, _) => format!("dz{j}"),
                _ => format!("dzb{j}"),
            });
        }
    }
    parts.join("^")
}

fn den_mul(a: &Den, b: &Den) -> Den {
    let mut out = Den::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

fn den_bump(d: &Den, id: BarrierId) -> Den {
    let mut one = Den::new();
    one.push((id, 1));
    den_mul(d, &one)
}

/// Registered barrier polynomials with cached antiholomorphic derivatives.
#[derive(Clone, Default, Debug)]
pub struct BarrierRegistry {
    polys: Vec<Poly>,
    derivs: Vec<Vec<(Var, Poly)>>,
    index: FxHashMap<Poly, BarrierId>,
}

impl BarrierRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `p`, registering it if new.
    pub fn register(&mut self, p: Poly) -> BarrierId {
        if let Some(&id) = self.index.get(&p) {
            return id;
        }
        let id = self.polys.len() as BarrierId;
        let derivs = (0..MAX_N)
            .flat_map(|j| [Var::Wb(j), Var::Zb(j)])
            .map(|v| (v, p.deriv(v)))
            .filter(|(_, d)| !d.is_zero())
            .collect();
        self.index.insert(p.clone(), id);
        self.polys.push(p);
        self.derivs.push(derivs);
        id
    }

    pub fn get(&self, id: BarrierId) -> &Poly {
        &self.polys[id as usize]
    }

    pub fn find(&self, p: &Poly) -> Option<BarrierId> {
        self.index.get(p).copied()
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    fn antiholo_derivs(&self, id: BarrierId) -> &[(Var, Poly)] {
        &self.derivs[id as usize]
    }

    fn pow(&self, id: BarrierId, e: u16, cache: &mut FxHashMap<(BarrierId, u16), Poly>) -> Poly {
        if e == 0 {
            return Poly::one();
        }
        if let Some(p) = cache.get(&(id, e)) {
            return p.clone();
        }
        let p = self.pow(id, e - 1, cache).mul_poly(self.get(id));
        cache.insert((id, e), p.clone());
        p
    }
}

/// A Leray section `G` together with its registered barrier `G·(ζ−z)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Section {
    pub g: Vec<Poly>,
    pub phi: BarrierId,
}

impl Section {
    /// Registers `G·(ζ−z)` and returns the section.
    pub fn register(g: Vec<Poly>, reg: &mut BarrierRegistry) -> Self {
        let phi = reg.register(contract(&g));
        Section { g, phi }
    }
}

/// `Σ_j g_j (ζ_j − z_j)`.
pub fn contract(g: &[Poly]) -> Poly {
    let mut acc = Poly::zero();
    for (j, gj) in g.iter().enumerate() {
        let d = &Poly::var(Var::W(j)) - &Poly::var(Var::Z(j));
        acc = &acc + &gj.mul_poly(&d);
    }
    acc
}

/// Differential form with barrier-power denominators.
#[derive(Clone, PartialEq, Eq)]
pub struct FormExpr {
    n: usize,
    basis: Basis,
    terms: BTreeMap<(Wedge, Den), Poly>,
}

impl FormExpr {
    pub fn zero(n: usize, basis: Basis) -> Self {
        FormExpr { n, basis, terms: BTreeMap::new() }
    }

    pub fn scalar(n: usize, basis: Basis, p: Poly) -> Self {
        let mut f = Self::zero(n, basis);
        f.add_term(0, Den::new(), p);
        f
    }

    /// A single basis covector of the given basis.
    pub fn covector(n: usize, basis: Basis, group: usize, j: usize) -> Self {
        assert!(j < n);
        let mut f = Self::zero(n, basis);
        f.add_term(bit(group, j), Den::new(), Poly::one());
        f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of stored `(wedge, denominator)` terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Total number of polynomial monomials across all terms.
    pub fn monomial_count(&self) -> usize {
        self.terms.values().map(Poly::len).sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Wedge, &Den, &Poly)> {
        self.terms.iter().map(|((w, d), p)| (*w, d, p))
    }

    pub fn add_term(&mut self, w: Wedge, d: Den, p: Poly) {
        if p.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry((w, d)) {
            Entry::Vacant(e) => {
                e.insert(p);
            }
            Entry::Occupied(mut e) => {
                let s = e.get() + &p;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    fn check(&self, other: &FormExpr) -> Result<(), FormError> {
        if self.n != other.n || self.basis != other.basis {
            return Err(FormError::Mismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &FormExpr) -> Result<FormExpr, FormError> {
        self.check(other)?;
        let mut out = self.clone();
        for ((w, d), p) in &other.terms {
            out.add_term(*w, d.clone(), p.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &FormExpr) -> Result<FormExpr, FormError> {
        self.add(&other.scale(&Cx::int(-1)))
    }

    pub fn scale(&self, c: &Cx) -> FormExpr {
        let mut out = Self::zero(self.n, self.basis);
        if c.is_zero() {
            return out;
        }
        out.terms = self.terms.iter().map(|(k, p)| (k.clone(), p.scale(c))).collect();
        out
    }

    pub fn mul_poly(&self, q: &Poly) -> FormExpr {
        let mut out = Self::zero(self.n, self.basis);
        for ((w, d), p) in &self.terms {
            out.add_term(*w, d.clone(), p.mul_poly(q));
        }
        out
    }

    /// Multiplies every coefficient by `Φ_id^{-e}`.
    pub fn divide_barrier(&self, id: BarrierId, e: u16) -> FormExpr {
        let mut extra = Den::new();
        extra.push((id, e));
        let mut out = Self::zero(self.n, self.basis);
        for ((w, d), p) in &self.terms {
            out.add_term(*w, den_mul(d, &extra), p.clone());
        }
        out
    }

    pub fn wedge(&self, other: &FormExpr) -> Result<FormExpr, FormError> {
        self.check(other)?;
        let mut acc: FxHashMap<(Wedge, Den), Vec<Poly>> = FxHashMap::default();
        for ((wa, da), pa) in &self.terms {
            for ((wb, db), pb) in &other.terms {
                let Some(s) = wedge_sign(*wa, *wb) else { continue };
                let mut p = pa.mul_poly(pb);
                if s < 0 {
                    p = -&p;
                }
                acc.entry((wa | wb, den_mul(da, db))).or_default().push(p);
            }
        }
        let mut out = Self::zero(self.n, self.basis);
        for (k, ps) in acc {
            let sum = sum_polys(ps);
            if !sum.is_zero() {
                out.terms.insert(k, sum);
            }
        }
        Ok(out)
    }

    fn dbar_over(&self, reg: &BarrierRegistry, vars: &[Var]) -> FormExpr {
        let mut out = Self::zero(self.n, self.basis);
        for ((w, d), p) in &self.terms {
            for &v in vars {
                let (g, j) = match v {
                    Var::Wb(j) => (GROUP_ANTI_ZETA, j),
                    Var::Zb(j) => (GROUP_ANTI_Z, j),
                    _ => unreachable!(),
                };
                let Some(sign) = wedge_sign(bit(g, j), *w) else { continue };
                let sc = Cx::int(sign as i64);
                let dp = p.deriv(v);
                if !dp.is_zero() {
                    out.add_term(bit(g, j) | w, d.clone(), dp.scale(&sc));
                }
                for &(id, e) in d.iter() {
                    let Some((_, dphi)) = reg.antiholo_derivs(id).iter().find(|(u, _)| *u == v) else {
                        continue;
                    };
                    let c = Cx::int(-(e as i64) * sign as i64);
                    out.add_term(bit(g, j) | w, den_bump(d, id), p.mul_poly(dphi).scale(&c));
                }
            }
        }
        out
    }

    fn antiholo_vars(&self, zeta: bool, z: bool) -> Vec<Var> {
        let mut v = Vec::new();
        for j in 0..self.n {
            if zeta {
                v.push(Var::Wb(j));
            }
            if z {
                v.push(Var::Zb(j));
            }
        }
        v
    }

    /// `∂̄_{ζ,z}` with the quotient rule on registered denominators.
    pub fn dbar(&self, reg: &BarrierRegistry) -> FormExpr {
        self.dbar_over(reg, &self.antiholo_vars(true, true))
    }

    pub fn dbar_z(&self, reg: &BarrierRegistry) -> FormExpr {
        self.dbar_over(reg, &self.antiholo_vars(false, true))
    }

    pub fn dbar_zeta(&self, reg: &BarrierRegistry) -> FormExpr {
        self.dbar_over(reg, &self.antiholo_vars(true, false))
    }

    /// Brings each wedge monomial to one common denominator; the result has
    /// no terms exactly when the form vanishes.
    pub fn normalize(&self, reg: &BarrierRegistry) -> FormExpr {
        let mut by_wedge: BTreeMap<Wedge, Vec<(&Den, &Poly)>> = BTreeMap::new();
        for ((w, d), p) in &self.terms {
            by_wedge.entry(*w).or_default().push((d, p));
        }
        let groups: Vec<_> = by_wedge.into_iter().collect();
        let reduced = crate::par::map_vec(&groups, |(w, items)| {
            let mut lcm: BTreeMap<BarrierId, u16> = BTreeMap::new();
            for (d, _) in items {
                for &(id, e) in d.iter() {
                    let m = lcm.entry(id).or_insert(0);
                    *m = (*m).max(e);
                }
            }
            let mut cache = FxHashMap::default();
            let mut parts = Vec::with_capacity(items.len());
            for (d, p) in items {
                let mut q = (*p).clone();
                for (&id, &l) in &lcm {
                    let e = d.iter().find(|t| t.0 == id).map_or(0, |t| t.1);
                    if l > e {
                        q = q.mul_poly(&reg.pow(id, l - e, &mut cache));
                    }
                }
                parts.push(q);
            }
            let den: Den = lcm.into_iter().collect();
            (*w, den, sum_polys(parts))
        });
        let mut out = Self::zero(self.n, self.basis);
        for (w, d, p) in reduced {
            out.add_term(w, d, p);
        }
        out
    }

    /// Exact when the common-denominator expansion is affordable, otherwise
    /// the modular evaluation test of [`FormExpr::is_zero_modular`].
    pub fn is_zero(&self, reg: &BarrierRegistry) -> bool {
        if self.terms.is_empty() {
            return true;
        }
        if self.exact_cost(reg) <= EXACT_BUDGET {
            return self.normalize(reg).terms.is_empty();
        }
        self.is_zero_modular(reg, MODULAR_TRIALS, 0x5eed).unwrap_or_else(|| self.normalize(reg).terms.is_empty())
    }

    /// Estimated monomial products needed by [`FormExpr::normalize`].
    pub fn exact_cost(&self, reg: &BarrierRegistry) -> f64 {
        let mut lcm: BTreeMap<(Wedge, BarrierId), u16> = BTreeMap::new();
        for (w, d) in self.terms.keys() {
            for &(id, e) in d.iter() {
                let m = lcm.entry((*w, id)).or_insert(0);
                *m = (*m).max(e);
            }
        }
        let mut cost = 0.0;
        for ((w, d), p) in &self.terms {
            let mut c = p.len() as f64;
            for (&(w2, id), &l) in lcm.range((*w, 0)..=(*w, BarrierId::MAX)) {
                debug_assert_eq!(w2, *w);
                let e = d.iter().find(|t| t.0 == id).map_or(0, |t| t.1);
                c *= (reg.get(id).len() as f64).powi(i32::from(l - e));
            }
            cost += c;
        }
        cost
    }

    /// Evaluates every wedge coefficient, as a rational function of the
    /// generator slots, at `trials` random points of `GF(p²)`. `false` is
    /// certain; `true` is wrong with probability at most `(deg / p)^trials`.
    /// `None` when some coefficient has no image mod `p`.
    pub fn is_zero_modular(&self, reg: &BarrierRegistry, trials: usize, seed: u64) -> Option<bool> {
        use crate::modular::Gf;
        let ids: Vec<BarrierId> = {
            let mut v: Vec<BarrierId> = self.terms.keys().flat_map(|(_, d)| d.iter().map(|t| t.0)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let max_exp = self
            .terms
            .values()
            .map(Poly::max_var_exp)
            .chain(ids.iter().map(|&id| reg.get(id).max_var_exp()))
            .max()
            .unwrap_or(0) as usize;
        let mut rng = crate::sampling::stream(seed, 0);
        let mut points = Vec::with_capacity(trials);
        let mut den_inv: FxHashMap<BarrierId, Vec<Gf>> = ids.iter().map(|&id| (id, Vec::new())).collect();
        'trial: while points.len() < trials {
            let pt: Vec<Vec<Gf>> = (0..crate::poly::NVARS)
                .map(|_| {
                    let x = Gf::random(&mut rng);
                    let mut pw = vec![Gf::ONE; max_exp + 1];
                    for e in 1..=max_exp {
                        pw[e] = pw[e - 1] * x;
                    }
                    pw
                })
                .collect();
            let mut invs = Vec::with_capacity(ids.len());
            for &id in &ids {
                match reg.get(id).eval_gf(std::slice::from_ref(&pt))?[0].inv() {
                    Some(v) => invs.push(v),
                    None => continue 'trial,
                }
            }
            for (&id, v) in ids.iter().zip(invs) {
                den_inv.get_mut(&id).expect("listed").push(v);
            }
            points.push(pt);
        }
        let mut by_wedge: BTreeMap<Wedge, Vec<(&Den, &Poly)>> = BTreeMap::new();
        for ((w, d), p) in &self.terms {
            by_wedge.entry(*w).or_default().push((d, p));
        }
        let groups: Vec<_> = by_wedge.into_values().collect();
        let sums = crate::par::map_vec(&groups, |items| {
            let mut acc = vec![Gf::ZERO; trials];
            for (d, p) in items {
                let vals = p.eval_gf(&points)?;
                for (t, (a, v)) in acc.iter_mut().zip(vals).enumerate() {
                    let mut x = v;
                    for &(id, e) in d.iter() {
                        let inv = den_inv[&id][t];
                        for _ in 0..e {
                            x = x * inv;
                        }
                    }
                    *a = *a + x;
                }
            }
            Some(acc.iter().all(|a| a.is_zero()))
        });
        let mut all = true;
        for s in sums {
            all &= s?;
        }
        Some(all)
    }

    /// Keeps terms with exactly `r` factors `dz̄` (valid in either basis).
    pub fn antiholo_z_part(&self, r: usize) -> FormExpr {
        self.filter(|w| group_count(w, GROUP_ANTI_Z) as usize == r)
    }

    pub fn filter(&self, keep: impl Fn(Wedge) -> bool) -> FormExpr {
        let mut out = Self::zero(self.n, self.basis);
        out.terms = self.terms.iter().filter(|((w, _), _)| keep(*w)).map(|(k, p)| (k.clone(), p.clone())).collect();
        out
    }

    /// The piece of type `(s, r)` in `z`, returned in the standard basis.
    pub fn bidegree_part(&self, s: usize, r: usize) -> FormExpr {
        self.to_standard().filter(|w| {
            group_count(w, GROUP_HOLO_Z) as usize == s && group_count(w, GROUP_ANTI_Z) as usize == r
        })
    }

    /// Largest wedge degree present.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(w, _)| w.count_ones()).max().unwrap_or(0)
    }

    fn rebase(&self, target: Basis, expand: impl Fn(usize) -> Vec<(usize, i64)>) -> FormExpr {
        let mut cache: FxHashMap<Wedge, Vec<(Wedge, i64)>> = FxHashMap::default();
        let mut out = Self::zero(self.n, target);
        for ((w, d), p) in &self.terms {
            let ex = cache.entry(*w).or_insert_with(|| expand_wedge(*w, &expand));
            for &(w2, c) in ex.iter() {
                out.add_term(w2, d.clone(), p.scale(&Cx::int(c)));
            }
        }
        out
    }

    pub fn to_standard(&self) -> FormExpr {
        match self.basis {
            Basis::Standard => self.clone(),
            Basis::Difference => self.rebase(Basis::Standard, difference_to_standard),
        }
    }

    pub fn to_difference(&self) -> FormExpr {
        match self.basis {
            Basis::Difference => self.clone(),
            Basis::Standard => self.rebase(Basis::Difference, standard_to_difference),
        }
    }

    /// Exchanges `ζ` and `z` (variables and covectors); the result is in the
    /// standard basis and may register swapped barriers.
    pub fn swap_variables(&self, reg: &mut BarrierRegistry) -> FormExpr {
        let std = self.to_standard();
        let mut idmap: FxHashMap<BarrierId, BarrierId> = FxHashMap::default();
        let mut out = Self::zero(self.n, Basis::Standard);
        for ((w, d), p) in &std.terms {
            let mut seq = Vec::new();
            let mut w2: Wedge = 0;
            for s in 0..16 {
                if w & (1 << s) != 0 {
                    let t = (s + 2 * MAX_N) % 16;
                    seq.push(t);
                    w2 |= 1 << t;
                }
            }
            let sign = sort_sign(&seq);
            let d2: Den = {
                let mut v: Vec<(BarrierId, u16)> = d
                    .iter()
                    .map(|&(id, e)| {
                        let nid = *idmap.entry(id).or_insert_with(|| {
                            let q = reg.get(id).swap_wz();
                            reg.register(q)
                        });
                        (nid, e)
                    })
                    .collect();
                v.sort();
                v.into_iter().collect()
            };
            out.add_term(w2, d2, p.swap_wz().scale(&Cx::int(sign as i64)));
        }
        out
    }

    /// Numeric value at `(ζ, z)` in the standard basis.
    pub fn evaluate(
        &self,
        reg: &BarrierRegistry,
        zeta: &[Complex64],
        z: &[Complex64],
        tol: f64,
    ) -> Result<NumForm, FormError> {
        let vals = point_values(zeta, z);
        let mut bvals: FxHashMap<BarrierId, Complex64> = FxHashMap::default();
        let mut acc: BTreeMap<Wedge, Complex64> = BTreeMap::new();
        let mut cache: FxHashMap<Wedge, Vec<(Wedge, i64)>> = FxHashMap::default();
        for ((w, d), p) in &self.terms {
            let mut v = p.eval(&vals);
            for &(id, e) in d.iter() {
                let b = match bvals.get(&id) {
                    Some(b) => *b,
                    None => {
                        let b = reg.get(id).eval(&vals);
                        if b.norm() <= tol {
                            return Err(FormError::Singular { id, value: b.norm() });
                        }
                        bvals.insert(id, b);
                        b
                    }
                };
                v /= b.powu(e as u32);
            }
            match self.basis {
                Basis::Standard => *acc.entry(*w).or_default() += v,
                Basis::Difference => {
                    let ex = cache.entry(*w).or_insert_with(|| expand_wedge(*w, &difference_to_standard));
                    for &(w2, c) in ex.iter() {
                        *acc.entry(w2).or_default() += v * c as f64;
                    }
                }
            }
        }
        Ok(NumForm { coefs: acc.into_iter().filter(|(_, c)| c.norm() > 0.0).collect() })
    }

    /// One term per line in the standard basis:
    /// `sign<TAB>wedge<TAB>denominator<TAB>numerator`.
    pub fn dump(&self) -> String {
        let std = self.to_standard();
        let mut out = String::new();
        for ((w, d), p) in &std.terms {
            let lead = p.terms().first().map_or(1, |t| t.1.leading_sign());
            let p = if lead < 0 { -p } else { p.clone() };
            let den = if d.is_empty() {
                "1".to_string()
            } else {
                d.iter().map(|(id, e)| format!("B{id}^{e}")).collect::<Vec<_>>().join("*")
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                if lead < 0 { "-" } else { "+" },
                wedge_name(*w, Basis::Standard),
                den,
                p
            );
        }
        out
    }
}

impl std::fmt::Debug for FormExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for ((w, d), p) in &self.terms {
            writeln!(f, "[{}] / {:?} : {}", wedge_name(*w, self.basis), d, p)?;
        }
        Ok(())
    }
}

fn sum_polys(mut ps: Vec<Poly>) -> Poly {
    while ps.len() > 1 {
        let mut next = Vec::with_capacity(ps.len().div_ceil(2));
        let mut it = ps.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(&a + &b),
                None => next.push(a),
            }
        }
        ps = next;
    }
    ps.pop().unwrap_or_default()
}

fn difference_to_standard(s: usize) -> Vec<(usize, i64)> {
    if s / MAX_N == GROUP_HOLO_ZETA {
        vec![(s, 1), (slot(GROUP_HOLO_Z, s % MAX_N), -1)]
    } else {
        vec![(s, 1)]
    }
}

fn standard_to_difference(s: usize) -> Vec<(usize, i64)> {
    if s / MAX_N == GROUP_HOLO_ZETA {
        vec![(s, 1), (slot(GROUP_HOLO_Z, s % MAX_N), 1)]
    } else {
        vec![(s, 1)]
    }
}

/// Expands a wedge monomial whose covectors are replaced by linear
/// combinations, returning canonical monomials with integer coefficients.
fn expand_wedge(w: Wedge, expand: &impl Fn(usize) -> Vec<(usize, i64)>) -> Vec<(Wedge, i64)> {
    let mut cur: Vec<(Wedge, i64)> = vec![(0, 1)];
    for s in 0..16 {
        if w & (1 << s) == 0 {
            continue;
        }
        let mut next: BTreeMap<Wedge, i64> = BTreeMap::new();
        for &(m, c) in &cur {
            for &(t, k) in &expand(s) {
                if let Some(sg) = wedge_sign(m, 1 << t) {
                    *next.entry(m | (1 << t)).or_default() += c * k * sg as i64;
                }
            }
        }
        cur = next.into_iter().filter(|(_, c)| *c != 0).collect();
    }
    cur
}

/// Numeric form value in the standard basis.
#[derive(Clone, Debug, Default)]
pub struct NumForm {
    pub coefs: Vec<(Wedge, Complex64)>,
}

impl NumForm {
    pub fn get(&self, w: Wedge) -> Complex64 {
        self.coefs.iter().find(|(v, _)| *v == w).map_or(Complex64::new(0.0, 0.0), |t| t.1)
    }

    /// Maximum coefficient magnitude.
    pub fn norm(&self) -> f64 {
        self.coefs.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }
}

/// The Cauchy–Fantappié form `G·d(ζ−z) / G·(ζ−z)` in the difference basis.
pub fn cf_form(n: usize, sec: &Section, reg: &BarrierRegistry) -> Result<FormExpr, FormError> {
    if n == 0 || n > MAX_N {
        return Err(FormError::Dimension(n));
    }
    if sec.g.len() != n {
        return Err(FormError::SectionLength { got: sec.g.len(), want: n });
    }
    if reg.get(sec.phi) != &contract(&sec.g) {
        return Err(FormError::BarrierMismatch(sec.phi));
    }
    let mut f = FormExpr::zero(n, Basis::Difference);
    let mut d = Den::new();
    d.push((sec.phi, 1));
    for (j, g) in sec.g.iter().enumerate() {
        f.add_term(bit(GROUP_HOLO_ZETA, j), d.clone(), g.clone());
    }
    Ok(f)
}

/// `(∂̄G)·d(ζ−z)` without denominator.
fn dbar_g_theta(n: usize, sec: &Section) -> FormExpr {
    let mut f = FormExpr::zero(n, Basis::Difference);
    for (j, g) in sec.g.iter().enumerate() {
        for a in 0..n {
            for (grp, v) in [(GROUP_ANTI_ZETA, Var::Wb(a)), (GROUP_ANTI_Z, Var::Zb(a))] {
                let dg = g.deriv(v);
                if !dg.is_zero() {
                    let s = wedge_sign(bit(grp, a), bit(GROUP_HOLO_ZETA, j)).unwrap();
                    f.add_term(bit(grp, a) | bit(GROUP_HOLO_ZETA, j), Den::new(), dg.scale(&Cx::int(s as i64)));
                }
            }
        }
    }
    f
}

/// Closed product form `ω^G ∧ ((∂̄G·d(ζ−z)) / G·(ζ−z))^k`.
pub fn cf_product_formula(n: usize, sec: &Section, k: usize, reg: &BarrierRegistry) -> Result<FormExpr, FormError> {
    let mut f = cf_form(n, sec, reg)?;
    let eta = dbar_g_theta(n, sec).divide_barrier(sec.phi, 1);
    for _ in 0..k {
        f = f.wedge(&eta)?;
    }
    Ok(f)
}

/// `ω^G ∧ (∂̄ω^G)^k` expanded from the definition.
pub fn cf_power(n: usize, sec: &Section, k: usize, reg: &BarrierRegistry) -> Result<FormExpr, FormError> {
    let w = cf_form(n, sec, reg)?;
    let dw = w.dbar(reg);
    let mut f = w;
    for _ in 0..k {
        f = f.wedge(&dw)?;
    }
    Ok(f)
}

/// Complete homogeneous sum `Σ_{|α| = d} x_1^{α_1} ∧ ⋯ ∧ x_m^{α_m}` of
/// even forms.
fn homogeneous_sum(xs: &[FormExpr], d: usize, n: usize) -> Result<FormExpr, FormError> {
    // h[i][e] over the first i forms.
    let one = FormExpr::scalar(n, Basis::Difference, Poly::one());
    let mut prev: Vec<FormExpr> = (0..=d).map(|e| if e == 0 { one.clone() } else { FormExpr::zero(n, Basis::Difference) }).collect();
    for x in xs {
        let mut cur = Vec::with_capacity(d + 1);
        cur.push(one.clone());
        for e in 1..=d {
            let v = prev[e].add(&x.wedge(&cur[e - 1])?)?;
            cur.push(v);
        }
        prev = cur;
    }
    Ok(prev.swap_remove(d))
}

fn dedupe_maps(maps: &[Section], strict: bool) -> Result<bool, FormError> {
    for (i, a) in maps.iter().enumerate() {
        if maps[i + 1..].contains(a) {
            return if strict { Err(FormError::RepeatedMap) } else { Ok(true) };
        }
    }
    Ok(false)
}

/// `Ω(G¹,…,Gᵐ)` expanded from its definition. `Ω(∅) = 0`, `m > n` leaves an
/// empty degree sum and gives `0`, and a repeated map gives `0` unless `strict`.
pub fn koppelman(n: usize, maps: &[Section], reg: &BarrierRegistry, strict: bool) -> Result<FormExpr, FormError> {
    let m = maps.len();
    if m == 0 || m > n || dedupe_maps(maps, strict)? {
        return Ok(FormExpr::zero(n, Basis::Difference));
    }
    let omegas: Vec<FormExpr> = maps.iter().map(|s| cf_form(n, s, reg)).collect::<Result<_, _>>()?;
    let dws: Vec<FormExpr> = omegas.iter().map(|w| w.dbar(reg)).collect();
    let mut head = omegas[0].clone();
    for w in &omegas[1..] {
        head = head.wedge(w)?;
    }
    head.wedge(&homogeneous_sum(&dws, n - m, n)?)
}

/// `Ω(G¹,…,Gᵐ)` through the product formula: inside the full wedge each
/// `∂̄ω^{Gⁱ}` may be replaced by `(∂̄Gⁱ·d(ζ−z))/Φ_i`. Equal to
/// [`koppelman`] term by term; much cheaper to build.
pub fn koppelman_reduced(n: usize, maps: &[Section], reg: &BarrierRegistry, strict: bool) -> Result<FormExpr, FormError> {
    let m = maps.len();
    if m == 0 || m > n || dedupe_maps(maps, strict)? {
        return Ok(FormExpr::zero(n, Basis::Difference));
    }
    let mut head = cf_form(n, &maps[0], reg)?;
    for s in &maps[1..] {
        head = head.wedge(&cf_form(n, s, reg)?)?;
    }
    let etas: Vec<FormExpr> = maps.iter().map(|s| dbar_g_theta(n, s).divide_barrier(s.phi, 1)).collect();
    head.wedge(&homogeneous_sum(&etas, n - m, n)?)
}

/// Bochner–Martinelli section `conj(ζ − z)`.
pub fn bochner_martinelli(n: usize, reg: &mut BarrierRegistry) -> Section {
    let g = (0..n).map(|j| &Poly::var(Var::Wb(j)) - &Poly::var(Var::Zb(j))).collect();
    Section::register(g, reg)
}

/// Random polynomial section of `n` components, each with `terms` monomials
/// of total degree at most `deg` and small Gaussian-integer coefficients.
/// Retries until `G·(ζ−z)` is nonzero.
pub fn random_section<R: rand::Rng>(n: usize, deg: u32, terms: usize, rng: &mut R, reg: &mut BarrierRegistry) -> Section {
    use crate::poly::mono_var;
    loop {
        let g: Vec<Poly> = (0..n)
            .map(|_| {
                Poly::from_terms((0..terms).map(|_| {
                    let d = rng.random_range(0..=deg);
                    let mut m = 0u128;
                    for _ in 0..d {
                        let grp = rng.random_range(0..4);
                        m += mono_var(grp * MAX_N + rng.random_range(0..n), 1);
                    }
                    let re = rng.random_range(-3i64..=3);
                    let im = if rng.random_bool(0.3) { rng.random_range(-2i64..=2) } else { 0 };
                    (m, Cx::new(re.into(), im.into()))
                }))
            })
            .collect();
        if !contract(&g).is_zero() {
            return Section::register(g, reg);
        }
    }
}

/// `∂̄Ω(G¹,…,Gᵐ) − Σ_j (−1)^j Ω(…,Ĝʲ,…)`, normalized.
pub fn koppelman_residual(n: usize, maps: &[Section], reg: &BarrierRegistry) -> Result<FormExpr, FormError> {
    let lhs = koppelman(n, maps, reg, false)?.dbar(reg);
    let mut rhs = FormExpr::zero(n, Basis::Difference);
    for j in 0..maps.len() {
        let mut rest = maps.to_vec();
        rest.remove(j);
        let t = koppelman(n, &rest, reg, false)?;
        // 1-based sign (−1)^{j+1}
        rhs = if j % 2 == 0 { rhs.sub(&t)? } else { rhs.add(&t)? };
    }
    Ok(lhs.sub(&rhs)?.normalize(reg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    #[test]
    fn wedge_examples() {
        let n = 2;
        let dw1 = FormExpr::covector(n, Basis::Standard, GROUP_HOLO_ZETA, 0);
        let dw2 = FormExpr::covector(n, Basis::Standard, GROUP_HOLO_ZETA, 1);
        let dzb2 = FormExpr::covector(n, Basis::Standard, GROUP_ANTI_Z, 1);
        assert!(dw1.wedge(&dw1).unwrap().is_empty());
        let a = dw1.wedge(&dzb2).unwrap();
        let b = dzb2.wedge(&dw1).unwrap().scale(&Cx::int(-1));
        assert_eq!(a, b);
        let mut reg = BarrierRegistry::new();
        let id = reg.register(parse_poly("w1 - z1", 2).unwrap());
        let x = dw1.divide_barrier(id, 1).wedge(&dw2.divide_barrier(id, 1)).unwrap();
        let (w, d, _) = x.terms().next().unwrap();
        assert_eq!(w, bit(0, 0) | bit(0, 1));
        assert_eq!(d.as_slice(), &[(id, 2)]);
    }

    #[test]
    fn dbar_examples() {
        let reg = BarrierRegistry::new();
        let c = FormExpr::scalar(2, Basis::Standard, Poly::int(7));
        assert!(c.dbar(&reg).is_empty());
        let f = FormExpr::covector(2, Basis::Standard, GROUP_HOLO_ZETA, 0).mul_poly(&Poly::var(Var::Wb(0)));
        let want = FormExpr::covector(2, Basis::Standard, GROUP_ANTI_ZETA, 0)
            .wedge(&FormExpr::covector(2, Basis::Standard, GROUP_HOLO_ZETA, 0))
            .unwrap();
        assert_eq!(f.dbar(&reg), want);
    }

    #[test]
    fn cf_form_examples() {
        let mut reg = BarrierRegistry::new();
        let bm = bochner_martinelli(1, &mut reg);
        assert_eq!(reg.get(bm.phi), &parse_poly("(conj(w1) - conj(z1))*(w1 - z1)", 1).unwrap());
        let w = cf_form(1, &bm, &reg).unwrap().to_standard();
        assert_eq!(w.len(), 2);
        let g = vec![Poly::one(), Poly::zero()];
        let s = Section::register(g, &mut reg);
        assert_eq!(reg.get(s.phi), &parse_poly("w1 - z1", 2).unwrap());
        let bad = Section { g: vec![Poly::one(), Poly::one()], phi: s.phi };
        assert_eq!(cf_form(2, &bad, &reg), Err(FormError::BarrierMismatch(s.phi)));
    }

    #[test]
    fn bm_kernel_matches_direct_formula() {
        let n = 2;
        let mut reg = BarrierRegistry::new();
        let bm = bochner_martinelli(n, &mut reg);
        let k = koppelman(n, std::slice::from_ref(&bm), &reg, false).unwrap();
        assert!(!k.bidegree_part(0, n - 1).is_empty());
        let zeta = [Complex64::new(0.3, -0.4), Complex64::new(0.1, 0.7)];
        let z = [Complex64::new(-0.2, 0.1), Complex64::new(0.05, 0.0)];
        let v = k.evaluate(&reg, &zeta, &z, 1e-12).unwrap();
        // Pure-ζ part of (ū·du) ∧ Σ_l dū_l ∧ du_l / |u|^4 with u = ζ − z.
        let u: Vec<Complex64> = zeta.iter().zip(&z).map(|(a, b)| a - b).collect();
        let r4 = (u[0].norm_sqr() + u[1].norm_sqr()).powi(2);
        let top = bit(GROUP_HOLO_ZETA, 0) | bit(GROUP_HOLO_ZETA, 1);
        let c1 = v.get(top | bit(GROUP_ANTI_ZETA, 0));
        let c2 = v.get(top | bit(GROUP_ANTI_ZETA, 1));
        assert!((c1 - u[1].conj() / r4).norm() < 1e-12);
        assert!((c2 + u[0].conj() / r4).norm() < 1e-12);
        assert!(k.evaluate(&reg, &z, &z, 1e-12).is_err());
    }

    #[test]
    fn repeated_map_is_zero() {
        let mut reg = BarrierRegistry::new();
        let bm = bochner_martinelli(2, &mut reg);
        assert!(koppelman(2, &[bm.clone(), bm.clone()], &reg, false).unwrap().is_empty());
        assert_eq!(koppelman(2, &[bm.clone(), bm], &reg, true), Err(FormError::RepeatedMap));
    }

    #[test]
    fn basis_roundtrip() {
        let mut reg = BarrierRegistry::new();
        let bm = bochner_martinelli(2, &mut reg);
        let k = koppelman(2, &[bm], &reg, false).unwrap();
        assert_eq!(k.to_standard().to_difference(), k);
    }
}
