use num_complex::Complex64;

use super::leray::LerayDatum;
use super::model::ModelManifold;
use super::BarrierError;
use crate::form::BarrierRegistry;
use crate::linalg;
use crate::poly::{point_values, Poly, Var};
use crate::rational::{Cx, Rational};
use crate::sampling;
use crate::simplicial;

/// First-order operator `Σ_ν holo[ν] ∂/∂ζ_ν + anti[ν] ∂/∂ζ̄_ν`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TangentField {
    pub holo: Vec<Poly>,
    pub anti: Vec<Poly>,
}

impl TangentField {
    pub fn apply(&self, p: &Poly) -> Poly {
        let mut acc = Poly::zero();
        for (nu, (h, a)) in self.holo.iter().zip(&self.anti).enumerate() {
            if !h.is_zero() {
                acc = &acc + &h.mul_poly(&p.deriv(Var::W(nu)));
            }
            if !a.is_zero() {
                acc = &acc + &a.mul_poly(&p.deriv(Var::Wb(nu)));
            }
        }
        acc
    }
}

/// Tangential fields `Y₁..Y_k` with `Y_i Φ_j(ζ,ζ) = δ_ij`.
///
/// The inverses of the Gram matrix `A` of the `∂ρ̃_i` and of the minor `B`
/// are carried as adjugates, so `fields[i] = det A · det B · Y_i` has
/// polynomial coefficients and `scale = det A · det B`.
#[derive(Clone, Debug)]
pub struct TangentFieldSet {
    pub fields: Vec<TangentField>,
    pub scale: Poly,
    pub nus: Vec<usize>,
    pub gram: Vec<Vec<Poly>>,
    pub minor: Vec<Vec<Poly>>,
}

impl TangentFieldSet {
    /// Asserts `Y_i ρ̃_j ≡ 0` and `(Y_i Φ_j)(ζ,ζ) = δ_ij · scale` exactly.
    pub fn verify(&self, data: &[&LerayDatum], reg: &BarrierRegistry) -> Result<(), BarrierError> {
        for (i, y) in self.fields.iter().enumerate() {
            for (j, d) in data.iter().enumerate() {
                if !y.apply(&d.rho_a.z_to_w()).is_zero() {
                    return Err(BarrierError::Invariant(format!("Y_{} is not tangent to rho_{}", i + 1, j + 1)));
                }
                let got = y.apply(d.phi(reg)).diagonal();
                let want = if i == j { self.scale.clone() } else { Poly::zero() };
                if got != want {
                    return Err(BarrierError::Invariant(format!("Y_{} Phi_{} is not Kronecker on the diagonal", i + 1, j + 1)));
                }
            }
        }
        Ok(())
    }
}

/// Builds the fields from `k` data with linearly independent directions.
pub fn tangent_fields(
    m: &ModelManifold,
    data: &[&LerayDatum],
) -> Result<TangentFieldSet, BarrierError> {
    let (n, k) = (m.n, m.k);
    if data.len() != k {
        return Err(BarrierError::Dimension(format!("need {k} directions, got {}", data.len())));
    }
    let dirs: Vec<Vec<Rational>> = data.iter().map(|d| d.a.clone()).collect();
    if simplicial::rank(&dirs) < k {
        return Err(BarrierError::SingularFrame("directions are linearly dependent".into()));
    }
    let rho: Vec<Poly> = data.iter().map(|d| d.rho_a.z_to_w()).collect();
    let h: Vec<Vec<Poly>> = rho.iter().map(|r| (0..n).map(|nu| r.deriv(Var::W(nu))).collect()).collect();
    let b: Vec<Vec<Poly>> = rho.iter().map(|r| (0..n).map(|nu| r.deriv(Var::Wb(nu))).collect()).collect();

    // gram[r][c] = <∂ρ̃_c, ∂ρ̃_r>.
    let gram: Vec<Vec<Poly>> = (0..k)
        .map(|r| {
            (0..k)
                .map(|c| (0..n).fold(Poly::zero(), |acc, nu| &acc + &h[c][nu].mul_poly(&b[r][nu])))
                .collect()
        })
        .collect();
    let nus = choose_nus(m, &b)?;
    let minor: Vec<Vec<Poly>> = nus.iter().map(|&nu| (0..k).map(|c| b[c][nu].clone()).collect()).collect();

    let det_a = linalg::poly_det(&gram);
    let det_b = linalg::poly_det(&minor);
    check_nonsingular(m, data, &det_a, "Gram matrix A")?;
    check_nonsingular(m, data, &det_b, "minor B")?;
    let adj_a = linalg::poly_adjugate(&gram);
    let adj_b = linalg::poly_adjugate(&minor);
    let half = Cx::real(Rational::new(1, 2));
    let fields = (0..k)
        .map(|i| {
            let mut holo = vec![Poly::zero(); n];
            let mut anti = vec![Poly::zero(); n];
            for j in 0..k {
                let ca = adj_a[i][j].mul_poly(&det_b).scale(&half);
                for nu in 0..n {
                    holo[nu] = &holo[nu] + &ca.mul_poly(&b[j][nu]);
                }
                let cb = adj_b[i][j].mul_poly(&det_a).scale(&half);
                anti[nus[j]] = &anti[nus[j]] - &cb;
            }
            TangentField { holo, anti }
        })
        .collect();
    Ok(TangentFieldSet { fields, scale: det_a.mul_poly(&det_b), nus, gram, minor })
}

/// Greedy complete pivoting on `(∂ρ̃_c/∂ζ̄_ν)(z⁰)`.
fn choose_nus(m: &ModelManifold, b: &[Vec<Poly>]) -> Result<Vec<usize>, BarrierError> {
    let z0 = m.base_numeric();
    let vals = point_values(&z0, &z0);
    let mut mat: Vec<Vec<Complex64>> = b.iter().map(|row| row.iter().map(|p| p.eval(&vals)).collect()).collect();
    let mut nus = Vec::new();
    let mut rows: Vec<usize> = (0..mat.len()).collect();
    while !rows.is_empty() {
        let mut best = (0.0, 0, 0);
        for (ri, &r) in rows.iter().enumerate() {
            for nu in (0..m.n).filter(|nu| !nus.contains(nu)) {
                let v = mat[r][nu].norm();
                if v > best.0 {
                    best = (v, ri, nu);
                }
            }
        }
        if best.0 < 1e-12 {
            return Err(BarrierError::SingularFrame("no invertible minor of the z-bar gradients".into()));
        }
        let (_, ri, nu) = best;
        let r = rows.remove(ri);
        let piv = mat[r][nu];
        for &o in &rows {
            let f = mat[o][nu] / piv;
            for c in 0..m.n {
                let t = mat[r][c];
                mat[o][c] -= f * t;
            }
        }
        nus.push(nu);
    }
    nus.sort_unstable();
    Ok(nus)
}

fn check_nonsingular(m: &ModelManifold, data: &[&LerayDatum], det: &Poly, what: &str) -> Result<(), BarrierError> {
    let center = m.base_numeric();
    let r = data.iter().map(|d| d.radius.to_f64()).fold(m.radius.to_f64(), f64::min);
    let mut rng = sampling::stream(0x7a57, 0);
    for _ in 0..2000 {
        let p = sampling::ball_point(&mut rng, &center, r);
        let v = det.eval(&point_values(&p, &p));
        if v.norm() < 1e-10 {
            return Err(BarrierError::SingularFrame(format!("{what} at {p:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::leray_fixed;

    #[test]
    fn model_a_fields() {
        let m = ModelManifold::model_a();
        let mut reg = BarrierRegistry::new();
        let d = leray_fixed(&m, &[Rational::ONE], &Rational::from_int(2), &Rational::new(1, 2), &Rational::new(1, 8), &mut reg)
            .unwrap();
        let set = tangent_fields(&m, &[&d]).unwrap();
        assert_eq!(set.nus, vec![2]);
        assert_eq!(set.minor.len(), 1);
        set.verify(&[&d], &reg).unwrap();
    }

    #[test]
    fn model_b_fields() {
        let m = ModelManifold::model_b();
        let mut reg = BarrierRegistry::new();
        let mk = |a: Vec<Rational>, reg: &mut BarrierRegistry| {
            leray_fixed(&m, &a, &Rational::from_int(2), &Rational::new(1, 2), &Rational::new(1, 8), reg).unwrap()
        };
        let d1 = mk(vec![Rational::ONE, Rational::ZERO], &mut reg);
        let d2 = mk(vec![Rational::ZERO, Rational::ONE], &mut reg);
        let set = tangent_fields(&m, &[&d1, &d2]).unwrap();
        assert_eq!(set.nus, vec![2, 3]);
        set.verify(&[&d1, &d2], &reg).unwrap();
        assert!(tangent_fields(&m, &[&d1, &d1]).is_err());
    }
}
