use std::fmt::Write as _;

use rand::Rng;

use super::{all_sigmas, index_sets_prime, IndexSet, KernelBundle, KernelError};
use crate::form::{koppelman_reduced, Basis, FormExpr};
use crate::simplicial::{Chain, Simplex};

/// Identities checked by [`KernelBundle::verify_identity`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    /// `∂̄Ω̃[τ] = Ω̃[∂τ]` on a random 2-chain of directions.
    KoppelmanChain,
    /// `∂̄Ω̃_B[σ_I] = −Ω̃[σ_I] − Ω̃_B[∂σ_I]`.
    BmSimplex,
    /// The prism identity for `Σ_{i<m} Ω̃[T(sdⁱσ_I)]`.
    Prism,
    /// `∂̄K^I = B^I − Ω̃[sd^m σ_I]`.
    KernelDbar,
    /// `∂̄E = K − R`.
    CorrectionDbar,
    /// `∂̄_z` of the `dz̄`-degree `r − 1` part of `Ω̃[sd^m σ_I]` vanishes for
    /// `r ≥ n − k − q + 1`.
    HighDegreeClosed,
}

impl Identity {
    pub const ALL: [Identity; 6] = [
        Identity::KoppelmanChain,
        Identity::BmSimplex,
        Identity::Prism,
        Identity::KernelDbar,
        Identity::CorrectionDbar,
        Identity::HighDegreeClosed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::KoppelmanChain => "koppelman_chain",
            Identity::BmSimplex => "two_two",
            Identity::Prism => "two_three",
            Identity::KernelDbar => "lemma23i",
            Identity::CorrectionDbar => "two_seventeen",
            Identity::HighDegreeClosed => "lemma22ii",
        }
    }

    pub fn from_name(s: &str) -> Option<Identity> {
        Identity::ALL.into_iter().find(|i| i.name() == s)
    }
}

/// An extracted solution kernel `ℛ_r`.
#[derive(Clone, Debug)]
pub struct SolutionKernel {
    pub r: usize,
    pub expr: FormExpr,
    pub sign: i64,
    /// True in the lower range, where `ζ` and `z` are exchanged.
    pub swapped: bool,
}

/// Term counts from the denominator shape check.
#[derive(Clone, Debug, Default)]
pub struct StructureReport {
    pub terms: usize,
    pub max_leray_barriers: usize,
}

/// Checks `r ∈ [0, q−1] ∪ [n−k−q, n−k]`; returns `true` for the lower range.
pub fn solution_range(n: usize, k: usize, q: usize, r: usize) -> Result<bool, KernelError> {
    let (n, k, q, ri) = (n as i64, k as i64, q as i64, r as i64);
    if (n - k - q..=n - k).contains(&ri) {
        Ok(false)
    } else if ri < q {
        Ok(true)
    } else {
        Err(KernelError::Range { r, lo_hi: q - 1, up_lo: n - k - q, up_hi: n - k })
    }
}

impl KernelBundle {
    fn zero(&self) -> FormExpr {
        FormExpr::zero(self.model.n, Basis::Difference)
    }

    fn omega_simplex(&self, with_b: bool, s: &Simplex) -> Result<FormExpr, KernelError> {
        let key = (with_b, s.clone());
        if let Some(f) = self.cache.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let mut maps = Vec::with_capacity(s.len() + 1);
        if with_b {
            maps.push(self.bm.clone());
        }
        for v in s.vertices() {
            maps.push(self.datum(v)?.section.clone());
        }
        let f = koppelman_reduced(self.model.n, &maps, &self.reg, false)?;
        self.cache.lock().unwrap().insert(key, f.clone());
        Ok(f)
    }

    fn omega_chain(&self, with_b: bool, c: &Chain) -> Result<FormExpr, KernelError> {
        let terms: Vec<(Simplex, i64)> = c.terms().map(|(s, k)| (s.clone(), k)).collect();
        let parts = crate::par::map_vec(&terms, |(s, k)| {
            self.omega_simplex(with_b, s).map(|f| f.scale(&crate::rational::Cx::int(*k)))
        });
        let mut acc = self.zero();
        for p in parts {
            acc = acc.add(&p?)?;
        }
        Ok(acc)
    }

    /// `Ω̃[c]` extended linearly over a chain of directions.
    pub fn omega(&self, c: &Chain) -> Result<FormExpr, KernelError> {
        self.omega_chain(false, c)
    }

    /// `Ω̃_B[c] = Ω(B, G_{ν¹}, …)` extended linearly.
    pub fn omega_b(&self, c: &Chain) -> Result<FormExpr, KernelError> {
        self.omega_chain(true, c)
    }

    /// The Bochner–Martinelli–Koppelman kernel `Ω(B)`.
    pub fn bmk(&self) -> Result<FormExpr, KernelError> {
        Ok(koppelman_reduced(self.model.n, std::slice::from_ref(&self.bm), &self.reg, false)?)
    }

    /// `Ω̃_B[∂σ_I]`, read as `−Ω(B)` when `|I| = 1`.
    fn omega_b_boundary(&self, i: &IndexSet) -> Result<FormExpr, KernelError> {
        if i.len() == 1 {
            return Ok(self.bmk()?.scale(&crate::rational::Cx::int(-1)));
        }
        self.omega_b(&Chain::simplex(i.sigma(self.model.k)).boundary()?)
    }

    fn sigma_chain(&self, i: &IndexSet) -> Chain {
        Chain::simplex(i.sigma(self.model.k))
    }

    /// `Σ_{i<m} T(sdⁱ c)`.
    fn prism_sum(&self, c: &Chain) -> Result<Chain, KernelError> {
        let mut acc = Chain::zero();
        for i in 0..self.m {
            acc = acc.add(&c.subdivide(i)?.prism()?);
        }
        Ok(acc)
    }

    pub fn k_i(&self, i: &IndexSet) -> Result<FormExpr, KernelError> {
        let s = self.sigma_chain(i);
        let base = self.omega_b(&s)?;
        if i.len() == 1 {
            return Ok(base);
        }
        Ok(base.sub(&self.omega(&self.prism_sum(&s)?)?)?)
    }

    /// `B^I = Σ_ν (−1)^{ν+1} K^{I(ν̂)}` for `|I| ≥ 2`, and `Ω(B)` for `|I| = 1`.
    pub fn b_i(&self, i: &IndexSet) -> Result<FormExpr, KernelError> {
        if i.len() == 1 {
            return self.bmk();
        }
        let mut acc = self.zero();
        for nu in 1..=i.len() {
            let t = self.k_i(&i.delete(nu))?;
            acc = if nu % 2 == 1 { acc.add(&t)? } else { acc.sub(&t)? };
        }
        Ok(acc)
    }

    /// The second expression for `B^I`: `−Ω̃_B[∂σ_I] + Σ_{i<m} Ω̃[T(sdⁱ∂σ_I)]`.
    pub fn b_i_alt(&self, i: &IndexSet) -> Result<FormExpr, KernelError> {
        let ds = self.sigma_chain(i).boundary()?;
        Ok(self.omega(&self.prism_sum(&ds)?)?.sub(&self.omega_b_boundary(i)?)?)
    }

    /// `K = Σ_{I ∈ ℐ′(k)} sgn(I) K^I`.
    pub fn k(&self) -> Result<FormExpr, KernelError> {
        let mut acc = self.zero();
        for i in index_sets_prime(self.model.k) {
            acc = acc.add(&self.k_i(&i)?.scale(&crate::rational::Cx::int(i.sgn())))?;
        }
        Ok(acc)
    }

    pub fn e(&self) -> Result<FormExpr, KernelError> {
        let mut acc = self.zero();
        for i in index_sets_prime(self.model.k) {
            let s = self.sigma_chain(&i);
            let t = self.omega_b(&s.cone(&self.apex)?)?.add(&self.omega(&self.prism_sum(&s)?.cone(&self.apex)?)?)?;
            acc = acc.add(&t.scale(&crate::rational::Cx::int(i.sgn())))?;
        }
        Ok(acc)
    }

    pub fn r(&self) -> Result<FormExpr, KernelError> {
        let mut acc = self.zero();
        for i in index_sets_prime(self.model.k) {
            let c = self.sigma_chain(&i).subdivide(self.m)?.cone(&self.apex)?;
            acc = acc.add(&self.omega(&c)?.scale(&crate::rational::Cx::int(i.sgn())))?;
        }
        Ok(acc)
    }

    /// Residuals of the vanishing statement: the part of `Ω̃[sd^m σ_I]` with
    /// at least `n − k − q + 1` factors `dz̄`, for every `I ∈ ℐ′(ℓ)`.
    pub fn high_degree_parts(&self) -> Result<Vec<(IndexSet, FormExpr)>, KernelError> {
        let (n, k, q) = (self.model.n, self.model.k, self.model.q);
        let mut out = Vec::new();
        for (i, s) in all_sigmas(k) {
            let x = self.omega(&Chain::simplex(s).subdivide(self.m)?)?;
            let lo = (n + 1).saturating_sub(k + q);
            let high = x.filter(|w| crate::form::group_count(w, crate::form::GROUP_ANTI_Z) as usize >= lo);
            out.push((i, high));
        }
        Ok(out)
    }

    /// Left minus right side of an identity, summed over all `I` where the
    /// identity is indexed by `I`. Test the result with [`FormExpr::is_zero`].
    pub fn verify_identity(&self, which: Identity) -> Result<FormExpr, KernelError> {
        let reg = &self.reg;
        let (n, k, q) = (self.model.n, self.model.k, self.model.q);
        let mut total = self.zero();
        match which {
            Identity::KoppelmanChain => {
                let c = self.random_two_chain(7);
                let lhs = self.omega(&c)?.dbar(reg);
                total = lhs.sub(&self.omega(&c.boundary()?)?)?;
            }
            Identity::BmSimplex => {
                for (i, s) in all_sigmas(k) {
                    let s = Chain::simplex(s);
                    let lhs = self.omega_b(&s)?.dbar(reg);
                    let rhs = self.omega(&s)?.add(&self.omega_b_boundary(&i)?)?;
                    total = total.add(&lhs.add(&rhs)?)?;
                }
            }
            Identity::Prism => {
                for (i, s) in all_sigmas(k) {
                    if i.len() < 2 {
                        continue;
                    }
                    let s = Chain::simplex(s);
                    let lhs = self.omega(&self.prism_sum(&s)?)?.dbar(reg);
                    let rhs = self
                        .omega(&s.subdivide(self.m)?)?
                        .sub(&self.omega(&s)?)?
                        .sub(&self.omega(&self.prism_sum(&s.boundary()?)?)?)?;
                    total = total.add(&lhs.sub(&rhs)?)?;
                }
            }
            Identity::KernelDbar => {
                for (i, s) in all_sigmas(k) {
                    let lhs = self.k_i(&i)?.dbar(reg);
                    let rhs = self.b_i(&i)?.sub(&self.omega(&Chain::simplex(s).subdivide(self.m)?)?)?;
                    total = total.add(&lhs.sub(&rhs)?)?;
                }
            }
            Identity::CorrectionDbar => {
                let lhs = self.e()?.dbar(reg);
                total = lhs.sub(&self.k()?.sub(&self.r()?)?)?;
            }
            Identity::HighDegreeClosed => {
                let lo = (n + 1).saturating_sub(k + q);
                for (_, s) in all_sigmas(k) {
                    let x = self.omega(&Chain::simplex(s).subdivide(self.m)?)?;
                    for r in lo.max(1)..=n {
                        total = total.add(&x.antiholo_z_part(r - 1).dbar_z(reg))?;
                    }
                }
            }
        }
        Ok(total)
    }

    fn random_two_chain(&self, seed: u64) -> Chain {
        let verts: Vec<_> = self.data.keys().cloned().collect();
        let mut rng = crate::sampling::stream(seed, 0);
        let mut c = Chain::zero();
        for _ in 0..3 {
            let a = rng.random_range(0..verts.len());
            let mut b = rng.random_range(0..verts.len());
            if verts.len() > 1 {
                while b == a {
                    b = rng.random_range(0..verts.len());
                }
            }
            let coef = rng.random_range(1..=3) * if rng.random_bool(0.5) { 1 } else { -1 };
            c = c.add(&Chain::term(coef, Simplex(vec![verts[a].clone(), verts[b].clone()])));
        }
        c
    }

    /// Shape of every term of every `K^I`: at most `|I|` Leray barriers
    /// (one more when prisms are present) besides the Bochner–Martinelli
    /// barrier, with denominator exponents summing to `n`.
    pub fn structure_check(&self) -> Result<StructureReport, KernelError> {
        let mut rep = StructureReport::default();
        for (i, _) in all_sigmas(self.model.k) {
            let allowed = i.len() + usize::from(self.m > 0 && i.len() > 1);
            let kern = self.k_i(&i)?;
            for (w, den, _) in kern.terms() {
                let leray = den.iter().filter(|(id, _)| *id != self.bm.phi).count();
                let total: usize = den.iter().map(|(_, e)| *e as usize).sum();
                if leray > allowed || total != self.model.n {
                    return Err(KernelError::Structure(format!(
                        "I = {i}: term {w:#x} has {leray} Leray barriers (allowed {allowed}) and total exponent {total}"
                    )));
                }
                rep.terms += 1;
                rep.max_leray_barriers = rep.max_leray_barriers.max(leray);
            }
        }
        let r = self.r()?;
        if r.terms().any(|(_, den, _)| den.iter().any(|(id, _)| *id == self.bm.phi)) {
            return Err(KernelError::Structure("R contains the Bochner-Martinelli barrier".into()));
        }
        Ok(rep)
    }

    /// `ℛ_r`: `(−1)^{r(k+1)} R_{0,r}(ζ,z)` in the upper range and
    /// `(−1)^{r(k+1)} R_{n,n−k−1−r}(z,ζ)` in the lower range.
    pub fn extract_solution_kernel(&mut self, r: usize) -> Result<SolutionKernel, KernelError> {
        let (n, k, q) = (self.model.n, self.model.k, self.model.q);
        let lower = solution_range(n, k, q, r)?;
        let sign = if (r * (k + 1)).is_multiple_of(2) { 1 } else { -1 };
        let full = self.r()?;
        let expr = if lower {
            full.bidegree_part(n, n - k - 1 - r).swap_variables(&mut self.reg)
        } else {
            full.bidegree_part(0, r)
        };
        Ok(SolutionKernel { r, expr: expr.scale(&crate::rational::Cx::int(sign)), sign, swapped: lower })
    }

    /// Text dump with a header naming every barrier in use.
    pub fn dump(&self, f: &FormExpr) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# barrier {} bochner_martinelli", self.bm.phi);
        for (v, d) in &self.data {
            let _ = writeln!(out, "# barrier {} direction {v:?}", d.section.phi);
        }
        out.push_str(&f.dump());
        out
    }
}
