use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::QuadratureError;
use crate::barrier::ModelManifold;
use crate::form::{slot, GROUP_ANTI_ZETA, GROUP_HOLO_ZETA};
use crate::linalg;
use crate::poly::{mono_exp, point_values, CompiledPoly, PowerTable, Var, MAX_N};

const RESIDUAL_TOL: f64 = 1e-12;

/// Graph chart of `M` near `z⁰`.
///
/// Coordinates `t ∈ ℝ^{2n−k}` are `(x₁, y₁, …, x_{n−k}, y_{n−k}, y_{n−k+1}, …, y_n)`;
/// the remaining `x_{n−k+i}` are solved from `ρ̂ = 0` by Newton's method.
#[derive(Clone, Debug)]
pub struct Patch {
    pub n: usize,
    pub k: usize,
    pub t0: Vec<f64>,
    /// Half side of the coordinate box around `t0`.
    pub half_width: f64,
    /// `+1` when `∂/∂t₁ ∧ … ∧ ∂/∂t_m` is positive for the orientation of `M₀`.
    pub orientation: f64,
    rho: Vec<CompiledPoly>,
    drho: Vec<Vec<CompiledPoly>>,
    max_exp: usize,
    x0: Vec<f64>,
    /// `H_i` when `ρ̂_i = 2 Re w_i + z′* H_i z′` exactly (free variables `z′`).
    quadric: Option<Vec<Vec<Vec<Complex64>>>>,
}

/// Affine automorphism of a quadric model in chart coordinates:
/// `z′ ↦ z′ + a`, `w_i ↦ w_i − ℓ_i(z′) + c_i` with `ℓ_i(z′) = a* H_i z′`.
/// It has unit Jacobian determinant in graph coordinates.
#[derive(Clone, Debug)]
pub struct Carry {
    a: Vec<Complex64>,
    ell: Vec<Vec<Complex64>>,
    c_im: Vec<f64>,
}

impl Carry {
    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        let f = self.a.len();
        let mut out = t.to_vec();
        for (j, a) in self.a.iter().enumerate() {
            out[2 * j] += a.re;
            out[2 * j + 1] += a.im;
        }
        for (i, (row, c)) in self.ell.iter().zip(&self.c_im).enumerate() {
            let l: Complex64 = (0..f).map(|j| row[j] * Complex64::new(t[2 * j], t[2 * j + 1])).sum();
            out[2 * f + i] += c - l.im;
        }
        out
    }
}

fn quadric_form(model: &ModelManifold) -> Option<Vec<Vec<Vec<Complex64>>>> {
    let (n, k) = (model.n, model.k);
    let f = n - k;
    let mut out = Vec::new();
    for (i, r) in model.rho_hat.iter().enumerate() {
        let w = n - k + i;
        let mut h = vec![vec![Complex64::new(0.0, 0.0); f]; f];
        let mut linear = 0;
        for (mono, c) in r.terms() {
            let vars: Vec<(Var, u8)> = (0..4 * MAX_N)
                .map(|v| (Var::from_index(v), mono_exp(*mono, v)))
                .filter(|(_, e)| *e > 0)
                .collect();
            let cf = c.to_c64();
            match vars.as_slice() {
                [(Var::Z(j), 1)] | [(Var::Zb(j), 1)] if *j == w && cf == Complex64::new(1.0, 0.0) => linear += 1,
                [(Var::Z(l), 1), (Var::Zb(j), 1)] if *j < f && *l < f => h[*j][*l] = cf,
                _ => return None,
            }
        }
        if linear != 2 {
            return None;
        }
        out.push(h);
    }
    Some(out)
}

/// A point of `M` with the complex Jacobian `∂ζ_j/∂t_a` (row-major, `n × m`).
#[derive(Clone, Debug)]
pub struct Embedded {
    pub t: Vec<f64>,
    pub zeta: Vec<Complex64>,
    pub jac: Vec<Complex64>,
}

impl Patch {
    pub fn new(model: &ModelManifold, half_width: f64) -> Result<Self, QuadratureError> {
        let (n, k) = (model.n, model.k);
        let rho: Vec<CompiledPoly> = model.rho_hat.iter().map(CompiledPoly::new).collect();
        let drho: Vec<Vec<CompiledPoly>> = model
            .rho_hat
            .iter()
            .map(|r| (0..n).map(|j| CompiledPoly::new(&r.deriv(Var::Z(j)))).collect())
            .collect();
        let max_exp = rho.iter().chain(drho.iter().flatten()).map(CompiledPoly::max_exp).max().unwrap_or(0);
        let base = model.base_numeric();
        let x0: Vec<f64> = (0..k).map(|i| base[n - k + i].re).collect();
        let quadric = quadric_form(model);
        let mut p = Patch { n, k, t0: Vec::new(), half_width, orientation: 1.0, rho, drho, max_exp, x0, quadric };
        p.t0 = p.chart(&base);
        let e = p.embed(&p.t0.clone())?;
        p.orientation = p.orientation_at(&e);
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        2 * self.n - self.k
    }

    /// Graph coordinates of an ambient point (the projection along the solved directions).
    pub fn chart(&self, zeta: &[Complex64]) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        let mut t = Vec::with_capacity(self.dim());
        for z in &zeta[..n - k] {
            t.push(z.re);
            t.push(z.im);
        }
        t.extend(zeta[n - k..].iter().map(|z| z.im));
        t
    }

    /// The automorphism carrying `from` to `to` (both on `M`), when the model is a quadric.
    pub fn carry(&self, from: &[Complex64], to: &[Complex64]) -> Option<Carry> {
        let h = self.quadric.as_ref()?;
        let f = self.n - self.k;
        let a: Vec<Complex64> = (0..f).map(|j| to[j] - from[j]).collect();
        let ell: Vec<Vec<Complex64>> =
            h.iter().map(|hi| (0..f).map(|l| (0..f).map(|j| a[j].conj() * hi[j][l]).sum()).collect()).collect();
        let c_im = ell
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let l: Complex64 = (0..f).map(|j| row[j] * from[j]).sum();
                (to[f + i] - from[f + i] + l).im
            })
            .collect();
        Some(Carry { a, ell, c_im })
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        t.iter().zip(&self.t0).all(|(a, b)| (a - b).abs() <= self.half_width)
    }

    fn table(&self, zeta: &[Complex64]) -> PowerTable {
        PowerTable::new(&point_values(&[], zeta), self.max_exp)
    }

    /// Real derivatives of `ρ̂_i` along `(x_j, y_j)`.
    fn real_grad(&self, tab: &PowerTable) -> Vec<Vec<(f64, f64)>> {
        self.drho
            .iter()
            .map(|row| {
                row.iter()
                    .map(|d| {
                        let g = d.eval(tab);
                        (2.0 * g.re, -2.0 * g.im)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn embed(&self, t: &[f64]) -> Result<Embedded, QuadratureError> {
        let (n, k, m) = (self.n, self.k, self.dim());
        if t.len() != m {
            return Err(QuadratureError::Dimension(format!("chart point has {} coordinates, need {m}", t.len())));
        }
        if !self.contains(t) {
            return Err(QuadratureError::OutsidePatch(t.to_vec()));
        }
        let mut zeta = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n - k {
            zeta[j] = Complex64::new(t[2 * j], t[2 * j + 1]);
        }
        for i in 0..k {
            zeta[n - k + i] = Complex64::new(self.x0[i], t[2 * (n - k) + i]);
        }
        let mut residual = f64::INFINITY;
        for _ in 0..60 {
            let tab = self.table(&zeta);
            let f: Vec<f64> = self.rho.iter().map(|r| r.eval(&tab).re).collect();
            residual = f.iter().fold(0.0, |s: f64, v| s.max(v.abs()));
            if residual <= 1e-15 {
                break;
            }
            let g = self.real_grad(&tab);
            let jx: Vec<f64> = (0..k).flat_map(|i| (0..k).map(move |l| (i, l))).map(|(i, l)| g[i][n - k + l].0).collect();
            let step = linalg::solve_real(&jx, &f, k).ok_or(QuadratureError::SingularGraph)?;
            for i in 0..k {
                zeta[n - k + i].re -= step[i];
            }
        }
        if residual > RESIDUAL_TOL {
            return Err(QuadratureError::NotOnManifold { residual });
        }
        let tab = self.table(&zeta);
        let g = self.real_grad(&tab);
        let jx: Vec<f64> = (0..k).flat_map(|i| (0..k).map(move |l| (i, l))).map(|(i, l)| g[i][n - k + l].0).collect();
        let mut jac = vec![Complex64::new(0.0, 0.0); n * m];
        for j in 0..n - k {
            jac[j * m + 2 * j] = Complex64::new(1.0, 0.0);
            jac[j * m + 2 * j + 1] = Complex64::new(0.0, 1.0);
        }
        for a in 0..m {
            // ∂ρ̂_i/∂t_a with x_{n−k+·} held fixed.
            let rhs: Vec<f64> = (0..k)
                .map(|i| if a < 2 * (n - k) { if a % 2 == 0 { g[i][a / 2].0 } else { g[i][a / 2].1 } } else { g[i][n - k + a - 2 * (n - k)].1 })
                .collect();
            let dx = linalg::solve_real(&jx, &rhs, k).ok_or(QuadratureError::SingularGraph)?;
            for i in 0..k {
                let mut v = Complex64::new(-dx[i], 0.0);
                if a == 2 * (n - k) + i {
                    v.im += 1.0;
                }
                jac[(n - k + i) * m + a] = v;
            }
        }
        Ok(Embedded { t: t.to_vec(), zeta, jac })
    }

    /// Sign of `vol(N₁, …, N_k, ∂_{t₁}, …, ∂_{t_m})` with `N_i = −∇ρ̂_i`:
    /// `M₀ = S_{1..k}` is oriented as the iterated boundary of `{ρ̂_i ≥ 0}`.
    fn orientation_at(&self, e: &Embedded) -> f64 {
        let (n, k, m) = (self.n, self.k, self.dim());
        let g = self.real_grad(&self.table(&e.zeta));
        let dim = 2 * n;
        let mut a = vec![0.0; dim * dim];
        // Column c, row r at a[r * dim + c].
        for i in 0..k {
            for j in 0..n {
                a[2 * j * dim + i] = -g[i][j].0;
                a[(2 * j + 1) * dim + i] = -g[i][j].1;
            }
        }
        for c in 0..m {
            for j in 0..n {
                let v = e.jac[j * m + c];
                a[2 * j * dim + k + c] = v.re;
                a[(2 * j + 1) * dim + k + c] = v.im;
            }
        }
        linalg::det_real_in_place(&mut a, dim).signum()
    }

    /// Riemannian volume density `√det(JᵀJ)` of the chart.
    pub fn volume(&self, e: &Embedded) -> f64 {
        let m = self.dim();
        let mut g = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                g[a * m + b] = (0..self.n).map(|j| (e.jac[j * m + a].conj() * e.jac[j * m + b]).re).sum();
            }
        }
        linalg::det_real_in_place(&mut g, m).max(0.0).sqrt()
    }

    /// `(dζ_{s₁} ∧ … ∧ dζ_{s_m})(∂_{t₁}, …, ∂_{t_m})` for wedge slots of the `ζ` groups.
    pub fn minor(&self, e: &Embedded, slots: &[usize]) -> Complex64 {
        let m = self.dim();
        debug_assert_eq!(slots.len(), m);
        let mut a = vec![Complex64::new(0.0, 0.0); m * m];
        for (r, &s) in slots.iter().enumerate() {
            let (j, conj) = if s < slot(GROUP_ANTI_ZETA, 0) {
                (s - slot(GROUP_HOLO_ZETA, 0), false)
            } else {
                (s - slot(GROUP_ANTI_ZETA, 0), true)
            };
            for c in 0..m {
                let v = e.jac[j * m + c];
                a[r * m + c] = if conj { v.conj() } else { v };
            }
        }
        linalg::det_in_place(&mut a, m)
    }

    /// Numerical rank of the real Jacobian.
    pub fn jacobian_rank(&self, e: &Embedded) -> usize {
        let m = self.dim();
        let real = DMatrix::from_fn(2 * self.n, m, |r, c| {
            let v = e.jac[(r / 2) * m + c];
            if r % 2 == 0 { v.re } else { v.im }
        });
        real.singular_values().iter().filter(|s| **s > 1e-9).count()
    }

    /// Basis `v₁, …, v_{n−k}` of the complex tangent space at `ζ`, with
    /// `v_j = e_j + (components along the solved directions)`.
    pub fn tangent_frame(&self, zeta: &[Complex64]) -> Result<Vec<Vec<Complex64>>, QuadratureError> {
        let (n, k) = (self.n, self.k);
        let tab = self.table(zeta);
        let d: Vec<Vec<Complex64>> = self.drho.iter().map(|row| row.iter().map(|p| p.eval(&tab)).collect()).collect();
        let a = DMatrix::from_fn(k, k, |i, l| d[i][n - k + l]);
        let lu = a.lu();
        (0..n - k)
            .map(|j| {
                let rhs = DVector::from_fn(k, |i, _| -d[i][j]);
                let w = lu.solve(&rhs).ok_or(QuadratureError::SingularGraph)?;
                let mut v = vec![Complex64::new(0.0, 0.0); n];
                v[j] = Complex64::new(1.0, 0.0);
                for l in 0..k {
                    v[n - k + l] = w[l];
                }
                Ok(v)
            })
            .collect()
    }

    /// Largest `|ρ̂_i(ζ)|`.
    pub fn residual(&self, zeta: &[Complex64]) -> f64 {
        let tab = self.table(zeta);
        self.rho.iter().map(|r| r.eval(&tab).norm()).fold(0.0, f64::max)
    }
}
