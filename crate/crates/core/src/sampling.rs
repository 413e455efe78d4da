//! Deterministic random streams and elementary samplers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent stream for `(seed, tag)`. Different tags never overlap.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(tag);
    r
}

/// Packs up to three small indices into a stream tag.
pub fn tag(a: u64, b: u64, c: u64) -> u64 {
    debug_assert!(a < 1 << 20 && b < 1 << 22 && c < 1 << 22);
    (a << 44) | (b << 22) | c
}

/// Uniform point in the Euclidean ball `|x| < r` of `ℂⁿ ≅ ℝ²ⁿ`.
pub fn ball_point<R: Rng>(rng: &mut R, center: &[Complex64], r: f64) -> Vec<Complex64> {
    let n = center.len();
    let g: Vec<f64> = (0..2 * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let u: f64 = rng.random();
    let s = r * u.powf(1.0 / (2 * n) as f64) / norm;
    (0..n).map(|j| center[j] + Complex64::new(g[2 * j], g[2 * j + 1]) * s).collect()
}

/// Unit vector in `ℝᵏ`, uniformly distributed on the sphere.
pub fn sphere_point<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(1, 5).random();
        let b: u64 = stream(1, 5).random();
        let c: u64 = stream(1, 6).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ball_points_stay_inside() {
        let mut r = stream(3, 0);
        let c = vec![Complex64::new(1.0, -1.0); 3];
        for _ in 0..1000 {
            let p = ball_point(&mut r, &c, 0.5);
            let d: f64 = p.iter().zip(&c).map(|(x, y)| (x - y).norm_sqr()).sum();
            assert!(d < 0.25);
        }
    }
}
