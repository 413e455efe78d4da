use num_complex::Complex64;
use rustc_hash::FxHashMap;

use super::QuadratureError;
use crate::form::{BarrierId, BarrierRegistry, FormExpr, Wedge};
use crate::poly::{point_values, CompiledPoly, PowerTable};

/// A kernel flattened for repeated numeric evaluation in the standard basis.
#[derive(Clone, Debug)]
pub struct CompiledForm {
    pub n: usize,
    wedges: Vec<Wedge>,
    terms: Vec<(usize, Vec<(usize, u32)>, CompiledPoly)>,
    barriers: Vec<(BarrierId, CompiledPoly)>,
    max_exp: usize,
    scale: Complex64,
}

/// Factor applied to assembled kernels before integration.
///
/// `(−1)^{n(n−1)/2} / (2πi)ⁿ · Ω(B)` is the normalized Bochner-Martinelli
/// kernel. The extra `−1` accounts for the singleton-face convention
/// `Ω̃_B[∂σ] = −Ω(B)`, under which every assembled kernel is the negative of
/// the one the homotopy formulas are stated for.
pub fn kernel_constant(n: usize) -> Complex64 {
    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    let sign = if (n * n.saturating_sub(1) / 2).is_multiple_of(2) { -1.0 } else { 1.0 };
    sign / two_pi_i.powu(n as u32)
}

impl CompiledForm {
    pub fn new(expr: &FormExpr, reg: &BarrierRegistry) -> Self {
        let std = expr.to_standard();
        let mut wedge_index: FxHashMap<Wedge, usize> = FxHashMap::default();
        let mut barrier_index: FxHashMap<BarrierId, usize> = FxHashMap::default();
        let mut out = CompiledForm { n: expr.n(), wedges: Vec::new(), terms: Vec::new(), barriers: Vec::new(), max_exp: 0, scale: Complex64::new(1.0, 0.0) };
        for (w, den, p) in std.terms() {
            let wi = *wedge_index.entry(w).or_insert_with(|| {
                out.wedges.push(w);
                out.wedges.len() - 1
            });
            let d = den
                .iter()
                .map(|&(id, e)| {
                    let bi = *barrier_index.entry(id).or_insert_with(|| {
                        out.barriers.push((id, CompiledPoly::new(reg.get(id))));
                        out.barriers.len() - 1
                    });
                    (bi, u32::from(e))
                })
                .collect();
            out.terms.push((wi, d, CompiledPoly::new(p)));
        }
        out.max_exp = out
            .terms
            .iter()
            .map(|t| t.2.max_exp())
            .chain(out.barriers.iter().map(|b| b.1.max_exp()))
            .max()
            .unwrap_or(0);
        out
    }

    /// A solution kernel, multiplied by [`kernel_constant`].
    pub fn kernel(expr: &FormExpr, reg: &BarrierRegistry) -> Self {
        let mut out = Self::new(expr, reg);
        out.scale = kernel_constant(out.n);
        out
    }

    /// Standard-basis wedges, in the order of [`CompiledForm::eval`] output.
    pub fn wedges(&self) -> &[Wedge] {
        &self.wedges
    }

    pub fn barrier_ids(&self) -> Vec<BarrierId> {
        self.barriers.iter().map(|b| b.0).collect()
    }

    /// Coefficients at `(ζ, z)`; fails where a barrier vanishes.
    pub fn eval(&self, zeta: &[Complex64], z: &[Complex64]) -> Result<Vec<Complex64>, QuadratureError> {
        let tab = PowerTable::new(&point_values(zeta, z), self.max_exp);
        let mut inv = Vec::with_capacity(self.barriers.len());
        for (id, b) in &self.barriers {
            let v = b.eval(&tab);
            if v.norm() < 1e-300 {
                return Err(QuadratureError::Singular { barrier: *id });
            }
            inv.push(v.inv());
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.wedges.len()];
        for (wi, den, p) in &self.terms {
            let mut v = p.eval(&tab) * self.scale;
            for &(bi, e) in den {
                v *= inv[bi].powu(e);
            }
            out[*wi] += v;
        }
        Ok(out)
    }

    /// Largest coefficient magnitude at `(ζ, z)`.
    pub fn norm(&self, zeta: &[Complex64], z: &[Complex64]) -> Result<f64, QuadratureError> {
        Ok(self.eval(zeta, z)?.iter().map(|c| c.norm()).fold(0.0, f64::max))
    }
}
