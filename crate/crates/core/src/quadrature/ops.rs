use num_complex::Complex64;

use super::numeric::CompiledForm;
use super::patch::Patch;
use super::plan::{estimate, Estimate, SamplePlan};
use super::testform::{tangential, tangential_value, Dbar, TestForm, ZetaForm};
use super::QuadratureError;
use crate::form::{bit, wedge_sign, BarrierRegistry, Wedge, GROUP_ANTI_Z};
use crate::kernels::SolutionKernel;
use crate::poly::MAX_N;

const ZETA_MASK: Wedge = (1 << (2 * MAX_N)) - 1;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn zeros(len: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); len]
}

/// `∫_M f(ζ) ∧ kern(ζ, z)` as a form in `z`.
#[derive(Clone, Debug)]
pub struct OperatorValue {
    /// `z` wedges of the components, in the standard basis.
    pub wedges: Vec<Wedge>,
    pub estimate: Estimate,
}

struct Pair {
    fi: usize,
    ki: usize,
    sign: f64,
    minor: usize,
    out: usize,
}

/// Precomputed pairing of a `ζ`-form with a compiled kernel.
pub struct Integrator<'a> {
    patch: &'a Patch,
    kernel: &'a CompiledForm,
    f: &'a dyn ZetaForm,
    pairs: Vec<Pair>,
    minors: Vec<Vec<usize>>,
    pub wedges: Vec<Wedge>,
}

impl<'a> Integrator<'a> {
    pub fn new(patch: &'a Patch, kernel: &'a CompiledForm, f: &'a dyn ZetaForm) -> Self {
        let m = patch.dim();
        let (mut pairs, mut minors, mut wedges) = (Vec::new(), Vec::<Vec<usize>>::new(), Vec::new());
        for (fi, fw) in f.wedges().into_iter().enumerate() {
            for (ki, &kw) in kernel.wedges().iter().enumerate() {
                let Some(sign) = wedge_sign(fw, kw) else { continue };
                let all = fw | kw;
                let zeta = all & ZETA_MASK;
                if zeta.count_ones() as usize != m {
                    continue;
                }
                let slots: Vec<usize> = (0..16).filter(|s| zeta & (1 << s) != 0).collect();
                let minor = minors.iter().position(|s| *s == slots).unwrap_or_else(|| {
                    minors.push(slots);
                    minors.len() - 1
                });
                let zw = all & !ZETA_MASK;
                let out = wedges.iter().position(|w| *w == zw).unwrap_or_else(|| {
                    wedges.push(zw);
                    wedges.len() - 1
                });
                pairs.push(Pair { fi, ki, sign: sign as f64, minor, out });
            }
        }
        Integrator { patch, kernel, f, pairs, minors, wedges }
    }

    /// Default integration radius around `z_t`: covers the support of `f`.
    pub fn cover_radius(&self, z_t: &[f64]) -> f64 {
        let (c, s) = self.f.support();
        dist(z_t, c) + s
    }

    /// Integrand in chart coordinates, oriented.
    fn integrand(&self, t: &[f64], z: &[Complex64]) -> Result<Vec<Complex64>, QuadratureError> {
        let mut out = zeros(self.wedges.len());
        let (c, s) = self.f.support();
        if self.pairs.is_empty() || dist(t, c) >= s {
            return Ok(out);
        }
        let e = self.patch.embed(t)?;
        let fv = self.f.eval(&e.zeta);
        if fv.iter().all(|v| v.norm() == 0.0) {
            return Ok(out);
        }
        let kv = self.kernel.eval(&e.zeta, z)?;
        let minors: Vec<Complex64> = self.minors.iter().map(|s| self.patch.minor(&e, s)).collect();
        for p in &self.pairs {
            out[p.out] += fv[p.fi] * kv[p.ki] * minors[p.minor] * (p.sign * self.patch.orientation);
        }
        Ok(out)
    }

    /// Estimate at the chart point `z_t` with shells centered there out to `radius`.
    pub fn at(&self, z_t: &[f64], radius: f64, plan: &SamplePlan) -> Result<OperatorValue, QuadratureError> {
        let z = self.patch.embed(z_t)?.zeta;
        if self.pairs.is_empty() {
            let len = self.wedges.len();
            return Ok(OperatorValue {
                wedges: self.wedges.clone(),
                estimate: Estimate { values: zeros(len), stderr: vec![0.0; len], samples: 0 },
            });
        }
        let strata = plan.strata(z_t, radius, 1.0);
        let estimate = estimate(&strata, plan.seed, self.wedges.len(), |t| self.integrand(t, &z))?;
        Ok(OperatorValue { wedges: self.wedges.clone(), estimate })
    }
}

/// `∫_M f ∧ kern(·, z)` at the chart point `z_t`, failing if the largest
/// standard error exceeds `tol`.
pub fn apply_operator(
    f: &dyn ZetaForm,
    kern: &SolutionKernel,
    reg: &BarrierRegistry,
    patch: &Patch,
    z_t: &[f64],
    plan: &SamplePlan,
    tol: Option<f64>,
) -> Result<OperatorValue, QuadratureError> {
    let compiled = CompiledForm::kernel(&kern.expr, reg);
    let integ = Integrator::new(patch, &compiled, f);
    let v = integ.at(z_t, integ.cover_radius(z_t), plan)?;
    if let Some(tol) = tol {
        let se = v.estimate.max_stderr();
        if se > tol {
            return Err(QuadratureError::Tolerance { stderr: se, tol });
        }
    }
    Ok(v)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub slope: f64,
}

/// `I(ε) = ∫_{|ζ−z| ≤ ε} ‖kern(ζ, z)‖ dλ(ζ)` for each `ε`, and the slope of
/// `log I − log_power · log(1 + |ln ε|)` against `log ε`.
pub fn scaling_probe(
    kern: &CompiledForm,
    patch: &Patch,
    z_t: &[f64],
    eps: &[f64],
    log_power: u32,
    plan: &SamplePlan,
) -> Result<ProbeReport, QuadratureError> {
    if eps.len() < 4 || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(QuadratureError::BadPlan("need at least 4 strictly decreasing radii".into()));
    }
    let z = patch.embed(z_t)?.zeta;
    let mut rows = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        let strata = plan.strata(z_t, e, 1.0);
        let est = estimate(&strata, plan.seed.wrapping_add(i as u64), 1, |t| {
            let p = patch.embed(t)?;
            let d: f64 = p.zeta.iter().zip(&z).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            if d > e {
                return Ok(zeros(1));
            }
            Ok(vec![Complex64::new(kern.norm(&p.zeta, &z)? * patch.volume(&p), 0.0)])
        })?;
        rows.push(ProbeRow { x: e, value: est.values[0].re, stderr: est.stderr[0] });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.x.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.value.ln() - log_power as f64 * (1.0 + r.x.ln().abs()).ln()).collect();
    Ok(ProbeReport { slope: fit_slope(&xs, &ys), rows })
}

/// `D = ∫_{|t − t(z¹)| ≤ radius} ‖R(ζ, z¹) − R(ζ, z²)‖ dλ(ζ)` with
/// `z² = z¹ + δ·direction` in chart coordinates, for each separation `δ`;
/// `swapped` evaluates `R(z^i, ζ)` instead. Shells around both singular
/// points are combined by the balance heuristic.
pub fn holder_probe(
    kern: &CompiledForm,
    patch: &Patch,
    z1_t: &[f64],
    direction: &[f64],
    separations: &[f64],
    radius: f64,
    swapped: bool,
    plan: &SamplePlan,
) -> Result<ProbeReport, QuadratureError> {
    let norm = dist(direction, &vec![0.0; direction.len()]);
    let z1 = patch.embed(z1_t)?.zeta;
    let mut rows = Vec::new();
    for (i, &d) in separations.iter().enumerate() {
        let z2_t: Vec<f64> = z1_t.iter().zip(direction).map(|(a, u)| a + d * u / norm).collect();
        let z2 = patch.embed(&z2_t)?.zeta;
        let mut strata = plan.strata(z1_t, radius, 0.5);
        strata.extend(plan.strata(&z2_t, radius + d, 0.5));
        let est = estimate(&strata, plan.seed.wrapping_add(i as u64), 1, |t| {
            if dist(t, z1_t) > radius {
                return Ok(zeros(1));
            }
            let p = patch.embed(t)?;
            let (a, b) = if swapped {
                (kern.eval(&z1, &p.zeta)?, kern.eval(&z2, &p.zeta)?)
            } else {
                (kern.eval(&p.zeta, &z1)?, kern.eval(&p.zeta, &z2)?)
            };
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            Ok(vec![Complex64::new(diff * patch.volume(&p), 0.0)])
        })?;
        rows.push(ProbeRow { x: d, value: est.values[0].re, stderr: est.stderr[0] });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.x.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.value.ln()).collect();
    let slope = if rows.iter().all(|r| r.value > 0.0) { fit_slope(&xs, &ys) } else { f64::NAN };
    Ok(ProbeReport { rows, slope })
}

#[derive(Clone, Debug)]
pub struct HomotopyRow {
    pub point: usize,
    pub component: usize,
    pub value: Complex64,
    pub expected: Complex64,
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub struct HomotopyReport {
    pub rows: Vec<HomotopyRow>,
    /// `max ‖value − expected‖ / max ‖expected‖` over all points.
    pub relative: f64,
}

/// Checks the homotopy formula for compactly supported `f`.
///
/// Top degree `r = n − k` (so `∂̄_b f = 0`): compares `∂̄_b ∫ f ∧ ℛ_{r−1}`
/// with `f`, differentiating by central differences with one Richardson
/// step in chart coordinates. Functions (`r = 0`, lower-range `ℛ_0`):
/// compares `−∫ ∂̄_b f ∧ ℛ_0` with `f`.
pub fn homotopy_check(
    f: &TestForm,
    kern: &SolutionKernel,
    reg: &BarrierRegistry,
    patch: &Patch,
    points: &[Vec<f64>],
    grid_step: f64,
    plan: &SamplePlan,
) -> Result<HomotopyReport, QuadratureError> {
    let (n, k) = (patch.n, patch.k);
    let compiled = CompiledForm::kernel(&kern.expr, reg);
    let mut rows = Vec::new();
    if f.r == 0 && kern.r == 0 {
        let df = Dbar(f);
        let integ = Integrator::new(patch, &compiled, &df);
        for (pi, p) in points.iter().enumerate() {
            let u = integ.at(p, integ.cover_radius(p), plan)?;
            let value = u.wedges.iter().position(|w| *w == 0).map_or(Complex64::new(0.0, 0.0), |i| -u.estimate.values[i]);
            let expected = tangential_value(f, 0, patch, p)?[0];
            rows.push(HomotopyRow { point: pi, component: 0, value, expected, stderr: u.estimate.max_stderr() });
        }
    } else if f.r == n - k && kern.r + 1 == f.r && !kern.swapped {
        let integ = Integrator::new(patch, &compiled, f);
        let m = patch.dim();
        let i = Complex64::new(0.0, 1.0);
        for (pi, p) in points.iter().enumerate() {
            let radius = integ.cover_radius(p) + 2.0 * grid_step;
            // Stencil (direction, step): co-moving copies of every sample,
            // carried by the model automorphism when there is one so that
            // the singular part of the kernel moves rigidly with `z`.
            let e = patch.embed(p)?;
            let mut stencil = Vec::new();
            for a in 0..m {
                for h in [grid_step, -grid_step, grid_step / 2.0, -grid_step / 2.0] {
                    let mut t = p.clone();
                    t[a] += h;
                    let z = patch.embed(&t)?.zeta;
                    let carry = patch.carry(&e.zeta, &z);
                    stencil.push((a, h, z, carry));
                }
            }
            let frame = patch.tangent_frame(&e.zeta)?;
            let want = tangential_value(f, f.r, patch, p)?;
            let len = want.len();
            let strata = plan.strata(p, radius, 1.0);
            let est = estimate(&strata, plan.seed, len, |t| {
                let mut deriv = vec![zeros(integ.wedges.len()); m];
                for (a, h, z, carry) in &stencil {
                    let ts = match carry {
                        Some(c) => c.apply(t),
                        None => {
                            let mut ts = t.to_vec();
                            ts[*a] += h;
                            ts
                        }
                    };
                    let g = integ.integrand(&ts, z)?;
                    // Richardson: (4 D(h/2) − D(h)) / 3 with D central.
                    let w = if h.abs() < grid_step { 4.0 } else { -1.0 } / (3.0 * 2.0 * h);
                    for (d, v) in deriv[*a].iter_mut().zip(g) {
                        *d += v * w;
                    }
                }
                // Extension constant along the solved directions:
                // ∂/∂z̄_j = ½(∂_{x_j} + i∂_{y_j}) for free j, (i/2)∂_{y_j} otherwise.
                let mut dbar_u: Vec<(Wedge, Complex64)> = Vec::new();
                for (ci, &w) in integ.wedges.iter().enumerate() {
                    for j in 0..n {
                        let bj = bit(GROUP_ANTI_Z, j);
                        let Some(sign) = wedge_sign(bj, w) else { continue };
                        let dz = if j < n - k {
                            (deriv[2 * j][ci] + i * deriv[2 * j + 1][ci]) * 0.5
                        } else {
                            i * deriv[2 * (n - k) + j - (n - k)][ci] * 0.5
                        };
                        dbar_u.push((bj | w, dz * sign as f64));
                    }
                }
                Ok(tangential(&dbar_u, GROUP_ANTI_Z, &frame, f.r))
            })?;
            for (c, w) in want.into_iter().enumerate() {
                rows.push(HomotopyRow { point: pi, component: c, value: est.values[c], expected: w, stderr: est.stderr[c] });
            }
        }
    } else {
        return Err(QuadratureError::Unsupported(format!(
            "homotopy check covers r = {} (top) with R_{{r-1}} and r = 0 with R_0; got f of degree {} and R_{}",
            n - k,
            f.r,
            kern.r
        )));
    }
    let scale = rows.iter().map(|r| r.expected.norm()).fold(0.0, f64::max);
    let err = rows.iter().map(|r| (r.value - r.expected).norm()).fold(0.0, f64::max);
    let relative = if scale > 0.0 { err / scale } else { err };
    Ok(HomotopyReport { rows, relative })
}
