use std::collections::BTreeMap;

use num_complex::Complex64;

use super::model::{format_direction, levi, ModelManifold};
use super::BarrierError;
use crate::form::{contract, BarrierRegistry, Section};
use crate::linalg::{self, CMat};
use crate::par;
use crate::poly::{point_values, CompiledPoly, Mono, Poly, PowerTable, Var};
use crate::rational::{Cx, Rational};
use crate::sampling;

const EIG_TOL: f64 = 1e-9;
const SLACK_TOL: f64 = 1e-12;
const CHUNK: usize = 4096;

/// Leray map `G_a` and barrier `Φ_a = G_a·(ζ−z)` for one direction `a`.
#[derive(Clone, Debug)]
pub struct LerayDatum {
    pub n: usize,
    pub a: Vec<Rational>,
    /// `ρ_a` in the `z` generators.
    pub rho_a: Poly,
    pub levi0: CMat,
    pub eigenvalues: Vec<f64>,
    /// Dimension of the positive subspace `T`.
    pub d: usize,
    pub p: CMat,
    pub q: CMat,
    /// Exact basis of `T = ker Q`.
    pub tangent: Vec<Vec<Cx>>,
    /// `a_coeffs[k][j] = ∂²ρ_a/∂ζ_k∂ζ_j`, in the `ζ` generators.
    pub a_coeffs: Vec<Vec<Poly>>,
    pub big_a: Rational,
    pub alpha: Rational,
    pub radius: Rational,
    pub center: Vec<Cx>,
    /// `F̃`, the truncated Levi polynomial.
    pub levi_poly: Poly,
    pub section: Section,
}

impl LerayDatum {
    pub fn g(&self) -> &[Poly] {
        &self.section.g
    }

    pub fn phi<'r>(&self, reg: &'r BarrierRegistry) -> &'r Poly {
        reg.get(self.section.phi)
    }

    pub fn direction_label(&self) -> String {
        format_direction(&self.a)
    }

    /// Re-checks the projection identities, `Φ = F̃ + A|Q(ζ−z)|²` and `d ≥ needed`.
    pub fn check_invariants(&self, reg: &BarrierRegistry, needed: usize) -> Result<(), BarrierError> {
        let fail = |s: &str| Err(BarrierError::Invariant(format!("{s} for direction {}", self.direction_label())));
        if linalg::mat_mul(&self.q, &self.q) != self.q || linalg::adjoint(&self.q) != self.q {
            return fail("Q is not an orthogonal projection");
        }
        if linalg::rank(&self.q) != self.n - self.d || self.tangent.len() != self.d {
            return fail("rank Q differs from n - d");
        }
        if self.d < needed {
            return Err(BarrierError::TooFewPositive { d: self.d, needed });
        }
        let expect = &self.levi_poly + &q_square(&self.q, self.n).scale_rational(&self.big_a);
        if *self.phi(reg) != expect {
            return fail("Phi differs from the Levi polynomial plus the Q-correction");
        }
        Ok(())
    }
}

/// Calibration settings for [`leray`].
#[derive(Clone, Debug)]
pub struct LerayOptions {
    pub samples: usize,
    pub seed: u64,
    pub max_steps: u32,
}

impl Default for LerayOptions {
    fn default() -> Self {
        LerayOptions { samples: 20_000, seed: 1, max_steps: 6 }
    }
}

fn diff(j: usize) -> Poly {
    &Poly::var(Var::W(j)) - &Poly::var(Var::Z(j))
}

/// `|Q(ζ−z)|² = Σ conj(ζ−z)_j Q_{jk} (ζ−z)_k`.
fn q_square(q: &CMat, n: usize) -> Poly {
    let mut acc = Poly::zero();
    for j in 0..n {
        for k in 0..n {
            if !q[j][k].is_zero() {
                acc = &acc + &diff(j).conj().mul_poly(&diff(k)).scale(&q[j][k]);
            }
        }
    }
    acc
}

/// Spectral data of `ρ_a` at `z⁰`: Levi matrix, eigenvalues, exact `Q`.
struct Spectral {
    levi0: CMat,
    vals: Vec<f64>,
    d: usize,
    q: CMat,
}

fn spectral(m: &ModelManifold, rho: &Poly) -> Result<Spectral, BarrierError> {
    let levi0 = levi(rho, &m.base_point);
    let (vals, vecs) = linalg::hermitian_eigen(&linalg::to_numeric(&levi0));
    let d = vals.iter().filter(|v| **v > EIG_TOL).count();
    let needed = m.q + m.k;
    if d < needed {
        return Err(BarrierError::TooFewPositive { d, needed });
    }
    let neg: Vec<&Vec<Complex64>> = vals.iter().zip(&vecs).filter(|(v, _)| **v <= EIG_TOL).map(|(_, x)| x).collect();
    // Rational approximations of the non-positive eigenvectors; exact when
    // the eigenvectors are rational.
    let mut q = None;
    for max_den in [1 << 10, 1 << 20] {
        let rounded: Vec<Vec<Cx>> = neg.iter().map(|v| round_vector(v, max_den)).collect();
        let mat: CMat = rounded.clone();
        if linalg::rank(&mat) == rounded.len() {
            q = Some(linalg::projection_onto(&rounded, m.n));
            break;
        }
    }
    let q = q.ok_or_else(|| BarrierError::Invariant("could not round the negative eigenvectors".into()))?;
    Ok(Spectral { levi0, vals, d, q })
}

fn round_vector(v: &[Complex64], max_den: i64) -> Vec<Cx> {
    let big = v.iter().copied().max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap()).unwrap();
    // Rotate so the largest entry is real and equal to 1.
    let s = Complex64::new(1.0, 0.0) / big;
    v.iter().map(|x| Cx::approximate(x * s, max_den)).collect()
}

fn floor_to(x: f64, den: i64) -> Rational {
    Rational::new((x * den as f64).floor() as i64, den)
}

fn ceil_to(x: f64, den: i64) -> Rational {
    Rational::new((x * den as f64).ceil() as i64, den)
}

fn build(
    m: &ModelManifold,
    a: &[Rational],
    sp: &Spectral,
    big_a: &Rational,
    alpha: &Rational,
    radius: &Rational,
    reg: &mut BarrierRegistry,
) -> Result<LerayDatum, BarrierError> {
    let n = m.n;
    let rho_a = m.rho_direction(a)?;
    let rho_w = rho_a.z_to_w();
    let grad: Vec<Poly> = (0..n).map(|j| rho_w.deriv(Var::W(j))).collect();
    let a_coeffs: Vec<Vec<Poly>> =
        (0..n).map(|k| (0..n).map(|j| grad[j].deriv(Var::W(k))).collect()).collect();
    let mut g = Vec::with_capacity(n);
    let mut levi_poly = Poly::zero();
    for j in 0..n {
        let mut gj = grad[j].scale(&Cx::int(2));
        let mut hess = Poly::zero();
        for (k, row) in a_coeffs.iter().enumerate() {
            hess = &hess + &row[j].mul_poly(&diff(k));
        }
        gj = &gj - &hess;
        levi_poly = &levi_poly + &gj.mul_poly(&diff(j));
        for k in 0..n {
            if !sp.q[j][k].is_zero() {
                let c = sp.q[j][k].conj().scale(big_a);
                gj = &gj + &diff(k).conj().scale(&c);
            }
        }
        g.push(gj);
    }
    debug_assert_eq!(contract(&g), &levi_poly + &q_square(&sp.q, n).scale_rational(big_a));
    let p = linalg::mat_sub(&linalg::identity(n), &sp.q);
    let tangent = linalg::kernel(&sp.q, n);
    Ok(LerayDatum {
        n,
        a: a.to_vec(),
        rho_a,
        levi0: sp.levi0.clone(),
        eigenvalues: sp.vals.clone(),
        d: sp.d,
        p,
        q: sp.q.clone(),
        tangent,
        a_coeffs,
        big_a: big_a.clone(),
        alpha: alpha.clone(),
        radius: radius.clone(),
        center: m.base_point.clone(),
        levi_poly,
        section: Section::register(g, reg),
    })
}

/// Builds the datum for explicit constants, without validation.
pub fn leray_fixed(
    m: &ModelManifold,
    a: &[Rational],
    big_a: &Rational,
    alpha: &Rational,
    radius: &Rational,
    reg: &mut BarrierRegistry,
) -> Result<LerayDatum, BarrierError> {
    let sp = spectral(m, &m.rho_direction(a)?)?;
    build(m, a, &sp, big_a, alpha, radius, reg)
}

/// Builds `G_a`, calibrating `A`, `α` and the radius until the barrier
/// inequality holds on random samples.
pub fn leray(
    m: &ModelManifold,
    a: &[Rational],
    opts: &LerayOptions,
    reg: &mut BarrierRegistry,
) -> Result<LerayDatum, BarrierError> {
    let sp = spectral(m, &m.rho_direction(a)?)?;
    let min_pos = sp.vals.iter().copied().filter(|v| *v > EIG_TOL).fold(f64::INFINITY, f64::min);
    let max_neg = sp.vals.iter().copied().filter(|v| *v < 0.0).fold(0.0, |s: f64, v| s.max(-v));
    let alpha = floor_to(min_pos / 2.0, 1024);
    if alpha < m.alpha_floor || alpha.signum() <= 0 {
        return Err(BarrierError::AlphaSearch(format!(
            "alpha = {alpha} below the floor {} for direction {}",
            m.alpha_floor,
            format_direction(a)
        )));
    }
    let a0 = if max_neg > 0.0 { ceil_to(2.0 * max_neg, 1024) } else { Rational::ONE };
    let mut last = String::new();
    let mut radius = m.radius.clone();
    for _ in 0..=opts.max_steps {
        let mut big_a = a0.clone();
        for _ in 0..=opts.max_steps {
            let mut scratch = BarrierRegistry::new();
            let d = build(m, a, &sp, &big_a, &alpha, &radius, &mut scratch)?;
            match validate_barrier(&d, &scratch, opts.samples, opts.seed) {
                // Keep the datum well inside the validated ball: the sampled
                // check misses rare edge violations.
                Ok(_) => return build(m, a, &sp, &big_a, &alpha, &(&radius * &Rational::new(3, 4)), reg),
                Err(BarrierError::Violation { slack, .. }) => {
                    last = format!("R = {radius}, A = {big_a}: slack {slack:e}");
                }
                Err(e) => return Err(e),
            }
            big_a = &big_a * &Rational::from_int(2);
        }
        radius = &radius * &Rational::new(1, 2);
    }
    Err(BarrierError::AlphaSearch(format!("direction {}: last attempt {last}", format_direction(a))))
}

/// Result of [`validate_barrier`].
#[derive(Clone, Debug)]
pub struct BarrierReport {
    pub samples: usize,
    pub min_slack: f64,
    pub argmin_zeta: Vec<Complex64>,
    pub argmin_z: Vec<Complex64>,
}

struct Evaluator {
    phi: CompiledPoly,
    rho_w: CompiledPoly,
    rho_z: CompiledPoly,
    max_exp: usize,
}

/// Checks `Re Φ ≥ ρ(ζ) − ρ(z) + (α/2)|ζ−z|² − 10⁻¹²` on `samples` pairs drawn
/// uniformly from the ball of radius `R` around `z⁰`.
pub fn validate_barrier(
    d: &LerayDatum,
    reg: &BarrierRegistry,
    samples: usize,
    seed: u64,
) -> Result<BarrierReport, BarrierError> {
    let rho_w = d.rho_a.z_to_w();
    let ev = Evaluator {
        phi: CompiledPoly::new(d.phi(reg)),
        rho_w: CompiledPoly::new(&rho_w),
        rho_z: CompiledPoly::new(&d.rho_a),
        max_exp: 0,
    };
    let max_exp = ev.phi.max_exp().max(ev.rho_w.max_exp()).max(ev.rho_z.max_exp());
    let ev = Evaluator { max_exp, ..ev };
    let center: Vec<Complex64> = d.center.iter().map(Cx::to_c64).collect();
    let r = d.radius.to_f64();
    let half_alpha = d.alpha.to_f64() / 2.0;
    let chunks = samples.div_ceil(CHUNK);
    let parts = par::map_range(chunks, |c| {
        let mut rng = sampling::stream(seed, sampling::tag(1, c as u64, 0));
        let count = CHUNK.min(samples - c * CHUNK);
        let mut best = (f64::INFINITY, Vec::new(), Vec::new());
        for _ in 0..count {
            let zeta = sampling::ball_point(&mut rng, &center, r);
            let z = sampling::ball_point(&mut rng, &center, r);
            let s = slack(&ev, &zeta, &z, half_alpha);
            if s < best.0 {
                best = (s, zeta, z);
            }
        }
        best
    });
    let mut best = (f64::INFINITY, Vec::new(), Vec::new());
    for p in parts {
        if p.0 < best.0 {
            best = p;
        }
    }
    if best.0 < -SLACK_TOL {
        let pairs = |v: &[Complex64]| v.iter().map(|c| (c.re, c.im)).collect();
        return Err(BarrierError::Violation { slack: best.0, zeta: pairs(&best.1), z: pairs(&best.2) });
    }
    Ok(BarrierReport { samples, min_slack: best.0, argmin_zeta: best.1, argmin_z: best.2 })
}

fn slack(ev: &Evaluator, zeta: &[Complex64], z: &[Complex64], half_alpha: f64) -> f64 {
    let t = PowerTable::new(&point_values(zeta, z), ev.max_exp);
    let dist: f64 = zeta.iter().zip(z).map(|(a, b)| (a - b).norm_sqr()).sum();
    ev.phi.eval(&t).re - (ev.rho_w.eval(&t).re - ev.rho_z.eval(&t).re) - half_alpha * dist
}

/// Dimension of `{t ∈ ℂⁿ : Σ_k conj(t_k) ∂P/∂z̄_k = 0 for every P}`.
pub fn holomorphic_directions(polys: &[&Poly], n: usize) -> usize {
    let mut rows: BTreeMap<(usize, Mono), Vec<Cx>> = BTreeMap::new();
    for (i, p) in polys.iter().enumerate() {
        for k in 0..n {
            for (mono, c) in p.deriv(Var::Zb(k)).terms() {
                rows.entry((i, *mono)).or_insert_with(|| vec![Cx::ZERO; n])[k] += c;
            }
        }
    }
    let mat: CMat = rows.into_values().collect();
    n - linalg::rank(&mat)
}

/// Verifies that `G_a` and `Φ_a` are holomorphic in `z` along every basis
/// vector of `T`; returns the number of holomorphic directions.
pub fn holomorphy_check(d: &LerayDatum, reg: &BarrierRegistry) -> Result<usize, BarrierError> {
    let mut polys: Vec<&Poly> = d.g().iter().collect();
    polys.push(d.phi(reg));
    for (i, t) in d.tangent.iter().enumerate() {
        for p in &polys {
            let mut acc = Poly::zero();
            for (k, tk) in t.iter().enumerate() {
                if !tk.is_zero() {
                    acc = &acc + &p.deriv(Var::Zb(k)).scale(&tk.conj());
                }
            }
            if !acc.is_zero() {
                return Err(BarrierError::NonHolomorphic(i));
            }
        }
    }
    let count = holomorphic_directions(&polys, d.n);
    debug_assert!(count >= d.tangent.len());
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> Vec<Rational> {
        vec![Rational::ONE]
    }

    #[test]
    fn model_a_q_is_coordinate_two() {
        let m = ModelManifold::model_a();
        let mut reg = BarrierRegistry::new();
        let d = leray_fixed(&m, &e1(), &Rational::from_int(2), &Rational::new(1, 2), &m.radius, &mut reg).unwrap();
        let mut q = linalg::zeros(3, 3);
        q[1][1] = Cx::ONE;
        assert_eq!(d.q, q);
        assert_eq!(d.d, 2);
        d.check_invariants(&reg, 2).unwrap();
        assert_eq!(holomorphy_check(&d, &reg).unwrap(), 2);
    }

    #[test]
    fn quadric_part_has_no_holomorphic_hessian() {
        let m = ModelManifold::model_a();
        let rw = m.rho_hat[0].z_to_w();
        for j in 0..3 {
            for k in 0..3 {
                assert!(rw.deriv(Var::W(j)).deriv(Var::W(k)).is_zero());
            }
        }
    }

    #[test]
    fn zero_a_violates_and_calibration_succeeds() {
        let m = ModelManifold::model_a();
        let mut reg = BarrierRegistry::new();
        let d = leray_fixed(&m, &e1(), &Rational::ZERO, &Rational::new(1, 2), &m.radius, &mut reg).unwrap();
        assert!(matches!(validate_barrier(&d, &reg, 4000, 3), Err(BarrierError::Violation { .. })));
        let d = leray(&m, &e1(), &LerayOptions::default(), &mut reg).unwrap();
        let rep = validate_barrier(&d, &reg, 20_000, 99).unwrap();
        assert!(rep.min_slack >= -SLACK_TOL);
    }

    #[test]
    fn slack_vanishes_on_the_diagonal() {
        let m = ModelManifold::model_a();
        let mut reg = BarrierRegistry::new();
        let d = leray_fixed(&m, &e1(), &Rational::from_int(2), &Rational::new(1, 2), &m.radius, &mut reg).unwrap();
        let ev = Evaluator {
            phi: CompiledPoly::new(d.phi(&reg)),
            rho_w: CompiledPoly::new(&d.rho_a.z_to_w()),
            rho_z: CompiledPoly::new(&d.rho_a),
            max_exp: 8,
        };
        let p = vec![Complex64::new(0.1, -0.2), Complex64::new(0.05, 0.0), Complex64::new(-0.1, 0.3)];
        assert!(slack(&ev, &p, &p, 0.25).abs() < 1e-15);
    }

    #[test]
    fn holomorphic_direction_counts() {
        let n = 3;
        let bm: Vec<Poly> = (0..n).map(|j| diff(j).conj()).collect();
        assert_eq!(holomorphic_directions(&bm.iter().collect::<Vec<_>>(), n), 0);
        let mut konst = vec![Poly::zero(); n];
        konst[0] = Poly::one();
        assert_eq!(holomorphic_directions(&konst.iter().collect::<Vec<_>>(), n), n);
    }
}
