//! Small dense linear algebra: exact over Gaussian rationals, numeric
//! Hermitian eigen-decomposition, and polynomial determinants.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::poly::Poly;
use crate::rational::Cx;

pub type CMat = Vec<Vec<Cx>>;

pub fn identity(n: usize) -> CMat {
    (0..n).map(|i| (0..n).map(|j| if i == j { Cx::ONE } else { Cx::ZERO }).collect()).collect()
}

pub fn zeros(r: usize, c: usize) -> CMat {
    vec![vec![Cx::ZERO; c]; r]
}

pub fn mat_mul(a: &CMat, b: &CMat) -> CMat {
    let (r, k, c) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = zeros(r, c);
    for i in 0..r {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..c {
                let t = &a[i][l] * &b[l][j];
                out[i][j] += &t;
            }
        }
    }
    out
}

pub fn adjoint(a: &CMat) -> CMat {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    (0..c).map(|j| (0..r).map(|i| a[i][j].conj()).collect()).collect()
}

pub fn mat_sub(a: &CMat, b: &CMat) -> CMat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

pub fn is_zero_mat(a: &CMat) -> bool {
    a.iter().all(|r| r.iter().all(Cx::is_zero))
}

/// Reduced row echelon form; returns pivot columns.
fn rref(m: &mut CMat) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for j in c..cols {
            m[r][j] = &m[r][j] * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in c..cols {
                    let t = &f * &m[r][j];
                    m[i][j] -= &t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(a: &CMat) -> usize {
    let mut m = a.clone();
    rref(&mut m).len()
}

/// Basis of `{x : a x = 0}` as column vectors.
pub fn kernel(a: &CMat, cols: usize) -> Vec<Vec<Cx>> {
    let mut m = a.clone();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Cx::ZERO; cols];
            v[f] = Cx::ONE;
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -&m[r][f];
            }
            v
        })
        .collect()
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    let n = a.len();
    let mut m: CMat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Cx::ONE } else { Cx::ZERO }));
            r
        })
        .collect();
    let piv = rref(&mut m);
    if piv.len() < n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Orthogonal projection onto the column span of `v` (columns given as
/// vectors): `V (V* V)^{-1} V*`. Exact for rational `V`.
pub fn projection_onto(vs: &[Vec<Cx>], n: usize) -> CMat {
    if vs.is_empty() {
        return zeros(n, n);
    }
    let v: CMat = (0..n).map(|i| vs.iter().map(|c| c[i].clone()).collect()).collect();
    let vh = adjoint(&v);
    let g = inverse(&mat_mul(&vh, &v)).expect("independent spanning vectors");
    mat_mul(&mat_mul(&v, &g), &vh)
}

pub fn to_numeric(a: &CMat) -> DMatrix<Complex64> {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    DMatrix::from_fn(r, c, |i, j| a[i][j].to_c64())
}

/// Eigenvalues (ascending) and unit eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &DMatrix<Complex64>) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let e = a.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[i].partial_cmp(&e.eigenvalues[j]).unwrap());
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| e.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// Orthonormal basis of the null space of a numeric matrix.
pub fn numeric_kernel(a: &DMatrix<Complex64>, tol: f64) -> Vec<Vec<Complex64>> {
    let cols = a.ncols();
    // Eigenvectors of a* a with (near) zero eigenvalue.
    let g = a.adjoint() * a;
    let (vals, vecs) = hermitian_eigen(&g);
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    vals.iter()
        .zip(vecs)
        .filter(|(v, _)| v.abs() <= tol * scale)
        .map(|(_, x)| x)
        .take(cols)
        .collect()
}

/// Determinant of a square polynomial matrix by cofactor expansion.
pub fn poly_det(m: &[Vec<Poly>]) -> Poly {
    let n = m.len();
    match n {
        0 => Poly::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = Poly::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor = poly_minor(m, 0, j);
                let t = m[0][j].mul_poly(&poly_det(&minor));
                acc = if j % 2 == 0 { &acc + &t } else { &acc - &t };
            }
            acc
        }
    }
}

fn poly_minor(m: &[Vec<Poly>], r: usize, c: usize) -> Vec<Vec<Poly>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != r)
        .map(|(_, row)| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, p)| p.clone()).collect())
        .collect()
}

/// Adjugate, so that `adj(M) · M = det(M) · I`.
pub fn poly_adjugate(m: &[Vec<Poly>]) -> Vec<Vec<Poly>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![Poly::one()]];
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = poly_det(&poly_minor(m, j, i));
                    if (i + j) % 2 == 0 {
                        d
                    } else {
                        -&d
                    }
                })
                .collect()
        })
        .collect()
}

/// Numeric determinant by partial-pivot elimination (destroys `a`).
pub fn det_in_place(a: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let mut p = c;
        let mut best = a[c * n + c].norm_sqr();
        for r in c + 1..n {
            let v = a[r * n + c].norm_sqr();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            for j in 0..n {
                a.swap(c * n + j, p * n + j);
            }
            det = -det;
        }
        let piv = a[c * n + c];
        det *= piv;
        let inv = 1.0 / piv;
        for r in c + 1..n {
            let f = a[r * n + c] * inv;
            if f.norm_sqr() == 0.0 {
                continue;
            }
            for j in c + 1..n {
                let t = a[c * n + j];
                a[r * n + j] -= f * t;
            }
        }
    }
    det
}

/// Real determinant by partial pivoting (destroys `a`).
pub fn det_real_in_place(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let mut p = c;
        for r in c + 1..n {
            if a[r * n + c].abs() > a[p * n + c].abs() {
                p = r;
            }
        }
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..n {
                a.swap(c * n + j, p * n + j);
            }
            det = -det;
        }
        let piv = a[c * n + c];
        det *= piv;
        for r in c + 1..n {
            let f = a[r * n + c] / piv;
            for j in c + 1..n {
                a[r * n + j] -= f * a[c * n + j];
            }
        }
    }
    det
}

/// Solves a real square system by Gaussian elimination; `None` if singular.
pub fn solve_real(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i * n + c].abs().partial_cmp(&m[j * n + c].abs()).unwrap())?;
        if m[p * n + c].abs() < 1e-300 {
            return None;
        }
        if p != c {
            for j in 0..n {
                m.swap(c * n + j, p * n + j);
            }
            x.swap(c, p);
        }
        for r in 0..n {
            if r != c {
                let f = m[r * n + c] / m[c * n + c];
                if f != 0.0 {
                    for j in c..n {
                        m[r * n + j] -= f * m[c * n + j];
                    }
                    x[r] -= f * x[c];
                }
            }
        }
    }
    Some((0..n).map(|i| x[i] / m[i * n + i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;

    fn c(v: i64) -> Cx {
        Cx::int(v)
    }

    #[test]
    fn exact_rank_kernel_inverse() {
        let a = vec![vec![c(1), c(2), c(3)], vec![c(2), c(4), c(6)]];
        assert_eq!(rank(&a), 1);
        let k = kernel(&a, 3);
        assert_eq!(k.len(), 2);
        for v in &k {
            let col: CMat = v.iter().map(|x| vec![x.clone()]).collect();
            assert!(is_zero_mat(&mat_mul(&a, &col)));
        }
        let b = vec![vec![c(2), c(1)], vec![c(1), c(1)]];
        let inv = inverse(&b).unwrap();
        assert_eq!(mat_mul(&b, &inv), identity(2));
        assert!(inverse(&vec![vec![c(1), c(2)], vec![c(2), c(4)]]).is_none());
    }

    #[test]
    fn projection_is_orthogonal() {
        let v = vec![vec![c(1), c(-1)]];
        let q = projection_onto(&v, 2);
        assert_eq!(q[0][0], Cx::real(Rational::new(1, 2)));
        assert_eq!(mat_mul(&q, &q), q);
        assert_eq!(adjoint(&q), q);
    }

    #[test]
    fn adjugate_identity() {
        let p = |s: &str| crate::poly::parse_poly(s, 2).unwrap();
        let m = vec![vec![p("z1"), p("conj(z2)")], vec![p("1"), p("z1*z2")]];
        let adj = poly_adjugate(&m);
        let det = poly_det(&m);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = Poly::zero();
                for l in 0..2 {
                    s = &s + &adj[i][l].mul_poly(&m[l][j]);
                }
                assert_eq!(s, if i == j { det.clone() } else { Poly::zero() });
            }
        }
    }

    #[test]
    fn numeric_determinants() {
        let mut a = vec![Complex64::new(2.0, 0.0), Complex64::new(1.0, 1.0), Complex64::new(0.0, 1.0), Complex64::new(3.0, 0.0)];
        let d = det_in_place(&mut a, 2);
        assert!((d - Complex64::new(7.0, -1.0)).norm() < 1e-12);
        let x = solve_real(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
