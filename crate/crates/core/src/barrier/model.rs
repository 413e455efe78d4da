use nalgebra::DMatrix;
use num_complex::Complex64;

use super::BarrierError;
use crate::ini::{self, ConfigError, Section};
use crate::linalg::{self, CMat};
use crate::poly::{parse_poly_at, point_values_exact, Poly, Var};
use crate::rational::{Cx, Rational};
use crate::sampling;
use crate::simplicial;

const EIG_TOL: f64 = 1e-9;

/// A generic CR submanifold `{ρ̂₁ = … = ρ̂_k = 0}` of `ℂⁿ` near `z⁰` with
/// polynomial defining functions in the `z` generators.
#[derive(Clone, Debug)]
pub struct ModelManifold {
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub rho_hat: Vec<Poly>,
    pub c: Rational,
    pub base_point: Vec<Cx>,
    pub radius: Rational,
    pub alpha_floor: Rational,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Invalid(#[from] BarrierError),
}

impl ModelManifold {
    /// Builds a model and checks rank, CR genericity and q-concavity at `z⁰`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        k: usize,
        q: usize,
        rho_hat: Vec<Poly>,
        c: Rational,
        base_point: Vec<Cx>,
        radius: Rational,
        alpha_floor: Rational,
    ) -> Result<Self, BarrierError> {
        if n == 0 || n > crate::poly::MAX_N || k == 0 || k >= n || rho_hat.len() != k || base_point.len() != n {
            return Err(BarrierError::Dimension(format!(
                "n = {n}, k = {k}, {} defining functions, base point of length {}",
                rho_hat.len(),
                base_point.len()
            )));
        }
        if c.signum() <= 0 || radius.signum() <= 0 || alpha_floor.signum() <= 0 {
            return Err(BarrierError::Dimension("C, radius and alpha_floor must be positive".into()));
        }
        let m = ModelManifold { n, k, q, rho_hat, c, base_point, radius, alpha_floor };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<(), BarrierError> {
        for (i, r) in self.rho_hat.iter().enumerate() {
            let in_z = (0..self.n).all(|j| !r.depends_on(Var::W(j)) && !r.depends_on(Var::Wb(j)));
            if r.conj() != *r || !in_z {
                return Err(BarrierError::NotReal(i + 1));
            }
        }
        // Real differentials as rows of a k × 2n matrix.
        let grads = self.holo_gradients();
        let real_rows: Vec<Vec<Rational>> = grads
            .iter()
            .map(|g| g.iter().flat_map(|c| [c.re.clone(), -&c.im]).collect())
            .collect();
        if simplicial::rank(&real_rows) < self.k {
            return Err(BarrierError::RankDeficient);
        }
        let anti: CMat = self
            .rho_hat
            .iter()
            .map(|r| (0..self.n).map(|j| self.eval_at_base(&r.deriv(Var::Zb(j)))).collect())
            .collect();
        if linalg::rank(&anti) < self.k {
            return Err(BarrierError::NotGeneric);
        }
        self.check_concavity()
    }

    fn check_concavity(&self) -> Result<(), BarrierError> {
        let u = self.complex_tangent();
        let levis: Vec<DMatrix<Complex64>> =
            self.rho_hat.iter().map(|r| linalg::to_numeric(&levi(r, &self.base_point))).collect();
        for x in concavity_grid(self.k) {
            let mut h = DMatrix::zeros(self.n, self.n);
            for (l, xv) in levis.iter().zip(&x) {
                h += l * Complex64::new(*xv, 0.0);
            }
            let r = u.adjoint() * h * &u;
            let (vals, _) = linalg::hermitian_eigen(&r);
            let negatives = vals.iter().filter(|v| **v < -EIG_TOL).count();
            if negatives < self.q {
                return Err(BarrierError::NotConcave { x, negatives });
            }
        }
        Ok(())
    }

    /// Exact value at `z⁰` of a polynomial in the `z` generators.
    pub fn eval_at_base(&self, p: &Poly) -> Cx {
        p.eval_exact(&point_values_exact(&[], &self.base_point))
    }

    pub fn base_numeric(&self) -> Vec<Complex64> {
        self.base_point.iter().map(Cx::to_c64).collect()
    }

    /// `(∂ρ̂_ν/∂z_j)(z⁰)` for each `ν`.
    pub fn holo_gradients(&self) -> Vec<Vec<Cx>> {
        self.rho_hat
            .iter()
            .map(|r| (0..self.n).map(|j| self.eval_at_base(&r.deriv(Var::Z(j)))).collect())
            .collect()
    }

    /// Orthonormal basis (as columns) of the complex tangent space at `z⁰`.
    pub fn complex_tangent(&self) -> DMatrix<Complex64> {
        let g = linalg::to_numeric(&self.holo_gradients());
        let basis = linalg::numeric_kernel(&g, 1e-12);
        DMatrix::from_fn(self.n, basis.len(), |i, j| basis[j][i])
    }

    /// `ρ_a = Σ a_ν ρ̂_ν + C|a|₁ Σ ρ̂_ν²`; requires `|a|₁ = 1`.
    pub fn rho_direction(&self, a: &[Rational]) -> Result<Poly, BarrierError> {
        let l1 = a.iter().fold(Rational::ZERO, |s, x| &s + &x.abs());
        if a.len() != self.k || !l1.is_one() {
            return Err(BarrierError::BadDirection(a.iter().map(Rational::to_f64).collect()));
        }
        let mut lin = Poly::zero();
        let mut sq = Poly::zero();
        for (r, x) in self.rho_hat.iter().zip(a) {
            lin = &lin + &r.scale_rational(x);
            sq = &sq + &r.mul_poly(r);
        }
        Ok(&lin + &sq.scale_rational(&self.c))
    }

    /// Parses the `[model]` section of a model file.
    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let doc = ini::parse(text)?;
        let sec = doc
            .section("model")
            .ok_or_else(|| ConfigError::new(1, 1, "missing [model] section"))?;
        Self::from_section(sec)
    }

    pub fn from_section(sec: &Section) -> Result<Self, ModelError> {
        sec.check_keys(&["n", "k", "q", "C", "radius", "alpha_floor", "base_point"], &["rho_hat_"])?;
        let int = |key: &str| -> Result<usize, ConfigError> {
            let e = sec.require(key)?;
            e.value
                .parse::<usize>()
                .map_err(|_| ConfigError::new(e.line, e.col, format!("'{key}' must be a nonnegative integer")))
        };
        let (n, k, q) = (int("n")?, int("k")?, int("q")?);
        if k > MAX_K {
            let e = sec.require("k")?;
            return Err(ConfigError::new(e.line, e.col, format!("k = {k} exceeds the desk-scale bound k <= {MAX_K}")).into());
        }
        if n == 0 || n > crate::poly::MAX_N {
            let e = sec.require("n")?;
            return Err(ConfigError::new(e.line, e.col, format!("n must be in 1..={}", crate::poly::MAX_N)).into());
        }
        let real = |key: &str| -> Result<Rational, ConfigError> {
            let e = sec.require(key)?;
            parse_real(&e.value, n, e.line, e.col)
        };
        let (c, radius, alpha_floor) = (real("C")?, real("radius")?, real("alpha_floor")?);
        let bp = sec.require("base_point")?;
        let mut base_point = Vec::new();
        for (s, col) in ini::split_list(bp) {
            let p = parse_poly_at(&s, n, bp.line, col).map_err(ConfigError::from)?;
            let v = p
                .as_constant()
                .ok_or_else(|| ConfigError::new(bp.line, col, "base point entries must be constants"))?;
            base_point.push(v);
        }
        if base_point.len() != n {
            return Err(ConfigError::new(bp.line, bp.col, format!("base_point needs {n} entries")).into());
        }
        let mut rho_hat = Vec::new();
        for i in 1..=k {
            let e = sec.require(&format!("rho_hat_{i}"))?;
            rho_hat.push(parse_poly_at(&e.value, n, e.line, e.col).map_err(ConfigError::from)?);
        }
        if let Some(e) = sec.entries.iter().find(|e| {
            e.key.strip_prefix("rho_hat_").and_then(|s| s.parse::<usize>().ok()).is_none_or(|i| i == 0 || i > k)
                && e.key.starts_with("rho_hat_")
        }) {
            return Err(ConfigError::new(e.line, 1, format!("unexpected key '{}' for k = {k}", e.key)).into());
        }
        Ok(Self::new(n, k, q, rho_hat, c, base_point, radius, alpha_floor)?)
    }

    /// `n = 3, k = 1, q = 1`: `ρ̂ = 2Re z₃ + |z₁|² − |z₂|²`.
    pub fn model_a() -> Self {
        Self::from_text(MODEL_A).expect("built-in model")
    }

    /// `n = 4, k = 2, q = 1` with a rotating Levi block on `span(e₁, e₂)`.
    pub fn model_b() -> Self {
        Self::from_text(MODEL_B).expect("built-in model")
    }
}

/// Larger codimension makes the 2^k index sets and their subdivisions
/// unaffordable for exact expansion.
pub const MAX_K: usize = 4;

pub const MODEL_A: &str = "\
[model]
n = 3
k = 1
q = 1
C = 1
radius = 1/2
alpha_floor = 1/64
base_point = 0, 0, 0
rho_hat_1 = z3 + conj(z3) + z1*conj(z1) - z2*conj(z2)
";

pub const MODEL_B: &str = "\
[model]
n = 4
k = 2
q = 1
C = 1
radius = 1/2
alpha_floor = 1/64
base_point = 0, 0, 0, 0
rho_hat_1 = z3 + conj(z3) + z1*conj(z1) - z2*conj(z2)
rho_hat_2 = z4 + conj(z4) + z1*conj(z2) + conj(z1)*z2
";

fn parse_real(s: &str, n: usize, line: usize, col: usize) -> Result<Rational, ConfigError> {
    let p = parse_poly_at(s, n, line, col)?;
    match p.as_constant() {
        Some(c) if c.is_real() => Ok(c.re),
        _ => Err(ConfigError::new(line, col, format!("expected a real rational constant, got '{s}'"))),
    }
}

/// Directions on the unit sphere of `ℝᵏ` used for the q-concavity check.
fn concavity_grid(k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..k {
        for s in [1.0, -1.0] {
            let mut x = vec![0.0; k];
            x[i] = s;
            out.push(x);
        }
        for j in i + 1..k {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut x = vec![0.0; k];
                x[i] = si * std::f64::consts::FRAC_1_SQRT_2;
                x[j] = sj * std::f64::consts::FRAC_1_SQRT_2;
                out.push(x);
            }
        }
    }
    if k > 1 {
        let mut rng = sampling::stream(0x5eed, 0);
        out.extend((0..64 * k).map(|_| sampling::sphere_point(&mut rng, k)));
    }
    out
}

/// Exact mixed Hessian `H[j][l] = ∂²ρ/∂z̄_j∂z_l` at `p`, so that the Levi
/// form is `t ↦ t* H t`.
pub fn levi(rho: &Poly, p: &[Cx]) -> CMat {
    let vals = point_values_exact(&[], p);
    let n = p.len();
    (0..n)
        .map(|j| {
            let dj = rho.deriv(Var::Zb(j));
            (0..n).map(|l| dj.deriv(Var::Z(l)).eval_exact(&vals)).collect()
        })
        .collect()
}

fn positive_count(h: &CMat) -> usize {
    let (vals, _) = linalg::hermitian_eigen(&linalg::to_numeric(h));
    vals.iter().filter(|v| **v > EIG_TOL).count()
}

pub(crate) fn format_direction(a: &[Rational]) -> String {
    let parts: Vec<String> = a.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

/// The `2k` convexified functions `ρ_{±j} = ±ρ̂_j + C Σ ρ̂_ν²`, in the order
/// `+1, −1, +2, −2, …`. Checks that convex combinations over every admissible
/// index set have at least `q + k` positive Levi eigenvalues at `z⁰`.
pub fn convexify(m: &ModelManifold) -> Result<Vec<(i32, Poly)>, BarrierError> {
    let mut out = Vec::new();
    for j in 1..=m.k {
        for s in [1i64, -1] {
            let mut a = vec![Rational::ZERO; m.k];
            a[j - 1] = Rational::from_int(s);
            out.push((s as i32 * j as i32, m.rho_direction(&a)?));
        }
    }
    let needed = m.q + m.k;
    const GRID: i64 = 6;
    for set in signed_sets(m.k) {
        for lam in compositions(GRID, set.len()) {
            let mut a = vec![Rational::ZERO; m.k];
            for (&j, &l) in set.iter().zip(&lam) {
                a[(j.unsigned_abs() - 1) as usize] = Rational::new(j.signum() as i64 * l, GRID);
            }
            let positives = positive_count(&levi(&m.rho_direction(&a)?, &m.base_point));
            if positives < needed {
                return Err(BarrierError::ConvexityFailed { direction: format_direction(&a), positives, needed });
            }
        }
    }
    Ok(out)
}

/// Index sets `I ⊂ {±1, …, ±k}` with no `j` and `−j` together.
fn signed_sets(k: usize) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let codes = 3usize.pow(k as u32);
    for mut c in 1..codes {
        let mut set = Vec::new();
        for j in 1..=k as i32 {
            match c % 3 {
                1 => set.push(j),
                2 => set.push(-j),
                _ => {}
            }
            c /= 3;
        }
        out.push(set);
    }
    out
}

/// All `parts`-tuples of nonnegative integers summing to `total`.
fn compositions(total: i64, parts: usize) -> Vec<Vec<i64>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    fn diag(v: &[i64]) -> CMat {
        let mut m = linalg::zeros(v.len(), v.len());
        for (i, x) in v.iter().enumerate() {
            m[i][i] = Cx::int(*x);
        }
        m
    }

    #[test]
    fn levi_examples() {
        let zero = vec![Cx::ZERO; 3];
        assert_eq!(levi(&parse_poly("z1*conj(z1)", 3).unwrap(), &zero), diag(&[1, 0, 0]));
        let p = vec![Cx::int(2), Cx::i(), Cx::int(-3)];
        assert!(linalg::is_zero_mat(&levi(&parse_poly("z3 + conj(z3)", 3).unwrap(), &p)));
        let m = ModelManifold::model_a();
        assert_eq!(levi(&m.rho_hat[0], &zero), diag(&[1, -1, 0]));
    }

    #[test]
    fn model_a_convexification() {
        let m = ModelManifold::model_a();
        let rhos = convexify(&m).unwrap();
        assert_eq!(rhos.len(), 2);
        assert_eq!(levi(&rhos[0].1, &m.base_point), diag(&[1, -1, 2]));
        let (vals, _) = linalg::hermitian_eigen(&linalg::to_numeric(&levi(&rhos[0].1, &m.base_point)));
        for (v, e) in vals.iter().zip([-1.0, 1.0, 2.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(m.eval_at_base(&rhos[1].1).is_zero());
    }

    #[test]
    fn model_b_levi_block_has_one_negative() {
        let m = ModelManifold::model_b();
        convexify(&m).unwrap();
        let mut rng = sampling::stream(7, 0);
        for _ in 0..50 {
            let x = sampling::sphere_point(&mut rng, 2);
            let h = linalg::to_numeric(&levi(&m.rho_hat[0], &m.base_point)) * Complex64::new(x[0], 0.0)
                + linalg::to_numeric(&levi(&m.rho_hat[1], &m.base_point)) * Complex64::new(x[1], 0.0);
            let block = h.view((0, 0), (2, 2)).into_owned();
            let (vals, _) = linalg::hermitian_eigen(&block);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!((vals[0] + r).abs() < 1e-12 && (vals[1] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn small_c_fails_convexity() {
        // A tangent-normal Levi coupling needs C large enough to absorb it.
        let src = "z3 + conj(z3) + z1*conj(z1) - z2*conj(z2) + 10*z1*conj(z3) + 10*conj(z1)*z3";
        let build = |c: Rational| {
            ModelManifold::new(3, 1, 1, vec![parse_poly(src, 3).unwrap()], c, vec![Cx::ZERO; 3], Rational::new(1, 2), Rational::new(1, 64))
                .unwrap()
        };
        match convexify(&build(Rational::new(1, 100))) {
            Err(BarrierError::ConvexityFailed { direction, positives, needed }) => {
                assert_eq!((direction.as_str(), positives, needed), ("(1)", 1, 2));
            }
            other => panic!("{other:?}"),
        }
        assert!(convexify(&build(Rational::from_int(100))).is_ok());
    }

    #[test]
    fn model_invariants_reject_bad_input() {
        let base = ModelManifold::model_a();
        let levi_flat = parse_poly("z3 + conj(z3) + z1*conj(z1)", 3).unwrap();
        let err = ModelManifold::new(3, 1, 1, vec![levi_flat], Rational::ONE, vec![Cx::ZERO; 3], base.radius.clone(), base.alpha_floor.clone());
        assert!(matches!(err, Err(BarrierError::NotConcave { .. })));
        let not_real = parse_poly("z3 + z1*conj(z1)", 3).unwrap();
        let err = ModelManifold::new(3, 1, 1, vec![not_real], Rational::ONE, vec![Cx::ZERO; 3], base.radius.clone(), base.alpha_floor.clone());
        assert!(matches!(err, Err(BarrierError::NotReal(1))));
        let singular = parse_poly("z1*conj(z1) - z2*conj(z2)", 3).unwrap();
        let err = ModelManifold::new(3, 1, 1, vec![singular], Rational::ONE, vec![Cx::ZERO; 3], base.radius.clone(), base.alpha_floor.clone());
        assert!(matches!(err, Err(BarrierError::RankDeficient)));
        // Normal direction along z1 instead of z3.
        let totally_real = parse_poly("z1 + conj(z1) + z2*conj(z2) - z3*conj(z3)", 3).unwrap();
        assert!(ModelManifold::new(3, 1, 1, vec![totally_real], Rational::ONE, vec![Cx::ZERO; 3], base.radius, base.alpha_floor).is_ok());
    }

    #[test]
    fn model_file_errors_carry_positions() {
        let bad = MODEL_A.replace("rho_hat_1 = z3", "rho_hat_1 = z9");
        match ModelManifold::from_text(&bad) {
            Err(ModelError::Config(e)) => assert_eq!(e.line, 9),
            other => panic!("{other:?}"),
        }
        let dup = format!("{MODEL_A}n = 3\n");
        assert!(matches!(ModelManifold::from_text(&dup), Err(ModelError::Config(_))));
        let extra = format!("{MODEL_A}rho_hat_2 = z1\n");
        assert!(matches!(ModelManifold::from_text(&extra), Err(ModelError::Config(_))));
        let wide = MODEL_A.replace("n = 3\nk = 1", "n = 7\nk = 5");
        match ModelManifold::from_text(&wide) {
            Err(ModelError::Config(e)) => assert!(e.line == 3 && e.msg.contains("desk-scale bound"), "{e}"),
            other => panic!("{other:?}"),
        }
    }
}
