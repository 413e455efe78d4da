use num_complex::Complex64;

use super::patch::Patch;
use super::QuadratureError;
use crate::form::{bit, slot, wedge_sign, Wedge, GROUP_ANTI_ZETA};
use crate::poly::{point_values, CompiledPoly, Poly, PowerTable, Var, MAX_N};

/// Smooth compactly supported profile `exp(1 − 1/(1 − |ζ−c|²/s²))`.
#[derive(Clone, Debug)]
pub struct Bump {
    pub center: Vec<Complex64>,
    pub radius: f64,
}

impl Bump {
    /// Value and `∂/∂ζ̄_j` for every `j`.
    pub fn eval(&self, zeta: &[Complex64]) -> (f64, Vec<Complex64>) {
        let s2 = self.radius * self.radius;
        let u: f64 = zeta.iter().zip(&self.center).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / s2;
        if u >= 1.0 {
            return (0.0, vec![Complex64::new(0.0, 0.0); zeta.len()]);
        }
        let b = (1.0 - 1.0 / (1.0 - u)).exp();
        let f = -b / ((1.0 - u) * (1.0 - u) * s2);
        (b, zeta.iter().zip(&self.center).map(|(a, c)| (a - c) * f).collect())
    }
}

/// A `ζ`-form evaluated pointwise in the ambient standard basis.
pub trait ZetaForm: Sync {
    /// Ambient `ζ̄` wedges, aligned with [`ZetaForm::eval`].
    fn wedges(&self) -> Vec<Wedge>;
    fn eval(&self, zeta: &[Complex64]) -> Vec<Complex64>;
    /// Chart ball `(center, radius)` containing the support.
    fn support(&self) -> (&[f64], f64);
}

/// `(0, r)` form `Σ_J p_J(ζ) · bump(ζ) dζ̄_J` with polynomial `p_J` in the `ζ` generators.
#[derive(Clone, Debug)]
pub struct TestForm {
    pub n: usize,
    pub r: usize,
    pub bump: Bump,
    pub terms: Vec<(Wedge, Poly)>,
    support_t: Vec<f64>,
    compiled: Vec<(CompiledPoly, Vec<CompiledPoly>)>,
    max_exp: usize,
}

impl TestForm {
    /// The bump is centered at the embedded chart point `center_t`; its support
    /// must lie strictly inside the patch box.
    pub fn new(patch: &Patch, center_t: &[f64], radius: f64, terms: Vec<(Vec<usize>, Poly)>) -> Result<Self, QuadratureError> {
        let n = patch.n;
        let inside = center_t.iter().zip(&patch.t0).all(|(c, t)| (c - t).abs() + radius < patch.half_width);
        if !inside {
            return Err(QuadratureError::Support(format!("bump of radius {radius} at {center_t:?} leaves the patch box")));
        }
        let center = patch.embed(center_t)?.zeta;
        let mut r = None;
        let mut out = Vec::new();
        for (idx, p) in terms {
            if idx.iter().any(|&j| j >= n) || r.is_some_and(|r| r != idx.len()) {
                return Err(QuadratureError::Dimension(format!("bad index set {idx:?} for a test form")));
            }
            r = Some(idx.len());
            let w = idx.iter().fold(0, |w, &j| w | bit(GROUP_ANTI_ZETA, j));
            if w.count_ones() as usize != idx.len() {
                return Err(QuadratureError::Dimension(format!("repeated index in {idx:?}")));
            }
            let sign = crate::form::sort_sign(&idx);
            out.push((w, if sign < 0 { p.scale(&crate::rational::Cx::int(-1)) } else { p }));
        }
        let compiled: Vec<_> = out
            .iter()
            .map(|(_, p)| (CompiledPoly::new(p), (0..n).map(|j| CompiledPoly::new(&p.deriv(Var::Wb(j)))).collect()))
            .collect();
        let max_exp = out.iter().map(|(_, p)| p.max_var_exp() as usize).max().unwrap_or(0);
        Ok(TestForm { n, r: r.unwrap_or(0), bump: Bump { center, radius }, terms: out, support_t: center_t.to_vec(), compiled, max_exp })
    }

    pub fn zero(patch: &Patch, r: usize) -> Self {
        TestForm {
            n: patch.n,
            r,
            bump: Bump { center: vec![Complex64::new(0.0, 0.0); patch.n], radius: 0.0 },
            terms: Vec::new(),
            support_t: patch.t0.clone(),
            compiled: Vec::new(),
            max_exp: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Same form with every coefficient scaled by `c`.
    pub fn scaled(&self, patch: &Patch, c: &crate::rational::Cx) -> Result<Self, QuadratureError> {
        self.with_terms(patch, self.terms.iter().map(|(w, p)| (*w, p.scale(c))).collect())
    }

    /// Another extension of the same form on `M`: `p_J + ρ̂₁(ζ) · g_J`.
    pub fn reextended(&self, patch: &Patch, rho1: &Poly, g: &Poly) -> Result<Self, QuadratureError> {
        let extra = rho1.z_to_w().mul_poly(g);
        self.with_terms(patch, self.terms.iter().map(|(w, p)| (*w, p + &extra)).collect())
    }

    fn with_terms(&self, patch: &Patch, terms: Vec<(Wedge, Poly)>) -> Result<Self, QuadratureError> {
        let idx = |w: Wedge| (0..self.n).filter(|j| w & bit(GROUP_ANTI_ZETA, *j) != 0).collect::<Vec<_>>();
        TestForm::new(patch, &self.support_t, self.bump.radius, terms.into_iter().map(|(w, p)| (idx(w), p)).collect())
    }

    fn table(&self, zeta: &[Complex64]) -> PowerTable {
        PowerTable::new(&point_values(zeta, &[]), self.max_exp)
    }

    /// Exact ambient `∂̄f = Σ_J Σ_j ∂(p_J b)/∂ζ̄_j dζ̄_j ∧ dζ̄_J` at `ζ`.
    pub fn dbar_at(&self, zeta: &[Complex64]) -> Vec<(Wedge, Complex64)> {
        let (b, db) = self.bump.eval(zeta);
        let mut acc: Vec<(Wedge, Complex64)> = Vec::new();
        if b == 0.0 {
            return acc;
        }
        let tab = self.table(zeta);
        for ((w, _), (p, dp)) in self.terms.iter().zip(&self.compiled) {
            let pv = p.eval(&tab);
            for j in 0..self.n {
                let bj = bit(GROUP_ANTI_ZETA, j);
                let Some(sign) = wedge_sign(bj, *w) else { continue };
                let v = (dp[j].eval(&tab) * b + pv * db[j]) * sign as f64;
                match acc.iter_mut().find(|(x, _)| *x == bj | *w) {
                    Some(e) => e.1 += v,
                    None => acc.push((bj | *w, v)),
                }
            }
        }
        acc
    }
}

impl ZetaForm for TestForm {
    fn wedges(&self) -> Vec<Wedge> {
        self.terms.iter().map(|t| t.0).collect()
    }

    fn eval(&self, zeta: &[Complex64]) -> Vec<Complex64> {
        let (b, _) = self.bump.eval(zeta);
        if b == 0.0 {
            return vec![Complex64::new(0.0, 0.0); self.terms.len()];
        }
        let tab = self.table(zeta);
        self.compiled.iter().map(|(p, _)| p.eval(&tab) * b).collect()
    }

    fn support(&self) -> (&[f64], f64) {
        (&self.support_t, self.bump.radius)
    }
}

/// The ambient `∂̄` of a test form, as a `ζ`-form of one degree higher.
pub struct Dbar<'a>(pub &'a TestForm);

impl ZetaForm for Dbar<'_> {
    fn wedges(&self) -> Vec<Wedge> {
        let f = self.0;
        let mut ws: Vec<Wedge> = f
            .terms
            .iter()
            .flat_map(|(w, _)| (0..f.n).map(move |j| bit(GROUP_ANTI_ZETA, j)).filter(move |b| b & w == 0).map(move |b| b | w))
            .collect();
        ws.sort_unstable();
        ws.dedup();
        ws
    }

    fn eval(&self, zeta: &[Complex64]) -> Vec<Complex64> {
        let vals = self.0.dbar_at(zeta);
        self.wedges().iter().map(|w| vals.iter().find(|v| v.0 == *w).map_or(Complex64::new(0.0, 0.0), |v| v.1)).collect()
    }

    fn support(&self) -> (&[f64], f64) {
        self.0.support()
    }
}

/// All `r`-subsets of `0..m` in lexicographic order.
pub fn subsets(m: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize == r {
            out.push((0..m).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out.sort();
    out
}

/// Tangential coefficients `α(v̄_{a₁}, …, v̄_{a_r})` of an ambient `(0, r)` form
/// given on the antiholomorphic slots of `group`, for every `r`-subset `A`
/// of the frame, in [`subsets`] order.
pub fn tangential(coefs: &[(Wedge, Complex64)], group: usize, frame: &[Vec<Complex64>], r: usize) -> Vec<Complex64> {
    let base = slot(group, 0);
    subsets(frame.len(), r)
        .iter()
        .map(|a| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (w, c) in coefs {
                let js: Vec<usize> = (0..MAX_N).filter(|j| w & (1 << (base + j)) != 0).collect();
                if js.len() != r || w.count_ones() as usize != r {
                    continue;
                }
                if r == 0 {
                    acc += c;
                    continue;
                }
                let mut m: Vec<Complex64> =
                    a.iter().flat_map(|&ai| js.iter().map(move |&j| frame[ai][j].conj())).collect();
                acc += c * crate::linalg::det_in_place(&mut m, r);
            }
            acc
        })
        .collect()
}

/// Tangential part of the ambient `∂̄f` at the chart point `t`.
pub fn dbar_b_numeric(f: &TestForm, patch: &Patch, t: &[f64]) -> Result<Vec<Complex64>, QuadratureError> {
    let e = patch.embed(t)?;
    let frame = patch.tangent_frame(&e.zeta)?;
    Ok(tangential(&f.dbar_at(&e.zeta), GROUP_ANTI_ZETA, &frame, f.r + 1))
}

/// Tangential part of `f` itself at `t`.
pub fn tangential_value(f: &dyn ZetaForm, r: usize, patch: &Patch, t: &[f64]) -> Result<Vec<Complex64>, QuadratureError> {
    let e = patch.embed(t)?;
    let frame = patch.tangent_frame(&e.zeta)?;
    let coefs: Vec<(Wedge, Complex64)> = f.wedges().into_iter().zip(f.eval(&e.zeta)).collect();
    Ok(tangential(&coefs, GROUP_ANTI_ZETA, &frame, r))
}
