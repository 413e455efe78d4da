use num_complex::Complex64;
use rand::Rng;

use super::QuadratureError;
use crate::{par, sampling};

const CHUNK: usize = 4096;

/// Sample allocation over geometric shells `2^{-j-1}ε₀ ≤ |t − c| ≤ 2^{-j}ε₀`
/// plus the inner ball, in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePlan {
    pub samples: usize,
    /// One entry per shell, inner ball last; sums to 1.
    pub fractions: Vec<f64>,
    pub seed: u64,
}

/// Reduction scheme: per-chunk sums over `CHUNK` samples combined by a
/// fixed pairwise tree in chunk order.
pub const REDUCTION_SCHEME: &str = "pairwise-4096";

impl SamplePlan {
    /// Equal allocation over `shells` shells and the inner ball.
    pub fn new(samples: usize, shells: usize, seed: u64) -> Self {
        let strata = shells + 1;
        SamplePlan { samples, fractions: vec![1.0 / strata as f64; strata], seed }
    }

    pub fn with_fractions(samples: usize, fractions: Vec<f64>, seed: u64) -> Result<Self, QuadratureError> {
        let total: f64 = fractions.iter().sum();
        if fractions.is_empty() || fractions.iter().any(|f| *f <= 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(QuadratureError::BadPlan(format!("shell fractions must be positive and sum to 1, got {total}")));
        }
        Ok(SamplePlan { samples, fractions, seed })
    }

    pub fn with_samples(&self, samples: usize) -> Self {
        SamplePlan { samples, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplePlan { seed, ..self.clone() }
    }

    /// Strata around `center` out to `radius`, sharing `share` of the samples.
    pub fn strata(&self, center: &[f64], radius: f64, share: f64) -> Vec<Stratum> {
        let shells = self.fractions.len() - 1;
        self.fractions
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let outer = radius * 0.5f64.powi(j as i32);
                let inner = if j == shells { 0.0 } else { outer / 2.0 };
                let count = ((self.samples as f64 * share * f).round() as usize).max(2);
                Stratum { center: center.to_vec(), inner, outer, count }
            })
            .collect()
    }
}

/// The shell `inner ≤ |t − center| ≤ outer`, sampled with uniform radius
/// and uniform direction, i.e. density `∝ |t − center|^{1−d}`: this cancels
/// the leading `r^{1−d}` kernel singularity and keeps the variance finite.
#[derive(Clone, Debug)]
pub struct Stratum {
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
    pub count: usize,
}

impl Stratum {
    /// Sampling density at `t` (zero outside the shell).
    fn density(&self, t: &[f64]) -> f64 {
        let d = self.center.len();
        let r = dist(t, &self.center);
        if r > self.outer || r < self.inner {
            return 0.0;
        }
        let sphere = d as f64 * ball_volume(d);
        1.0 / ((self.outer - self.inner) * sphere * r.powi(d as i32 - 1))
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let dir = sampling::sphere_point(rng, self.center.len());
        let u: f64 = rng.random();
        let r = self.inner + u * (self.outer - self.inner);
        self.center.iter().zip(dir).map(|(c, x)| c + r * x).collect()
    }
}

pub fn ball_volume(d: usize) -> f64 {
    // V_d = π^{d/2} / Γ(d/2 + 1) via the recursion V_d = 2π/d · V_{d−2}.
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * ball_volume(d - 2),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Vector-valued Monte Carlo estimate with per-component standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub values: Vec<Complex64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

impl Estimate {
    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone)]
struct Partial {
    sum: Vec<Complex64>,
    sumsq: Vec<f64>,
}

impl Partial {
    fn zero(len: usize) -> Self {
        Partial { sum: vec![Complex64::new(0.0, 0.0); len], sumsq: vec![0.0; len] }
    }

    fn merge(mut self, o: &Partial) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&o.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&o.sumsq) {
            *a += b;
        }
        self
    }
}

fn tree_reduce(mut parts: Vec<Partial>, len: usize) -> Partial {
    if parts.is_empty() {
        return Partial::zero(len);
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(&b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("nonempty")
}

/// Multiple-importance estimate of `∫ h dt` over the union of the strata.
///
/// Each stratum is a sampling technique; samples are weighted by the
/// balance heuristic `1 / Σ_s count_s · p_s(t)`, which reduces to ordinary
/// stratified sampling when the strata are disjoint. `h` returns
/// `len` components and must vanish outside the integration domain.
pub fn estimate<H>(strata: &[Stratum], seed: u64, len: usize, h: H) -> Result<Estimate, QuadratureError>
where
    H: Fn(&[f64]) -> Result<Vec<Complex64>, QuadratureError> + Sync,
{
    let mut jobs = Vec::new();
    for (si, s) in strata.iter().enumerate() {
        for c in 0..s.count.div_ceil(CHUNK) {
            jobs.push((si, c));
        }
    }
    let parts = par::map_vec(&jobs, |&(si, c)| -> Result<Partial, QuadratureError> {
        let s = &strata[si];
        let mut rng = sampling::stream(seed, sampling::tag(si as u64, c as u64, 0));
        let mut p = Partial::zero(len);
        for _ in 0..CHUNK.min(s.count - c * CHUNK) {
            let t = s.draw(&mut rng);
            let d: f64 = strata.iter().map(|o| o.count as f64 * o.density(&t)).sum();
            let vals = h(&t)?;
            for (i, v) in vals.iter().enumerate() {
                let y = v / d;
                p.sum[i] += y;
                p.sumsq[i] += y.norm_sqr();
            }
        }
        Ok(p)
    });
    let mut by_stratum: Vec<Vec<Partial>> = vec![Vec::new(); strata.len()];
    for ((si, _), p) in jobs.iter().zip(parts) {
        by_stratum[*si].push(p?);
    }
    let mut values = vec![Complex64::new(0.0, 0.0); len];
    let mut var = vec![0.0; len];
    let mut samples = 0;
    for (s, parts) in strata.iter().zip(by_stratum) {
        let tot = tree_reduce(parts, len);
        let n = s.count as f64;
        samples += s.count;
        for i in 0..len {
            values[i] += tot.sum[i];
            let within = (tot.sumsq[i] - tot.sum[i].norm_sqr() / n) / (n - 1.0);
            var[i] += n * within.max(0.0);
        }
    }
    Ok(Estimate { values, stderr: var.into_iter().map(f64::sqrt).collect(), samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes() {
        assert!((ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
        assert!((ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn fractions_validated() {
        assert!(SamplePlan::with_fractions(10, vec![0.5, 0.25], 1).is_err());
        assert!(SamplePlan::with_fractions(10, vec![0.5, 0.5], 1).is_ok());
        let p = SamplePlan::new(900, 8, 1);
        assert!((p.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_integrand_gives_volume() {
        let plan = SamplePlan::new(20_000, 4, 3);
        let strata = plan.strata(&[0.0; 3], 2.0, 1.0);
        let e = estimate(&strata, plan.seed, 1, |_| Ok(vec![Complex64::new(1.0, 0.0)])).unwrap();
        let exact = ball_volume(3) * 8.0;
        assert!((e.values[0].re - exact).abs() < 3.0 * e.stderr[0], "{e:?}");
        // The radial density integrates r^{1−d} exactly.
        let e = estimate(&strata, plan.seed, 1, |t| {
            let r = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
            Ok(vec![Complex64::new(1.0 / (r * r), 0.0)])
        })
        .unwrap();
        assert!((e.values[0].re - 4.0 * std::f64::consts::PI * 2.0).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn overlapping_strata_stay_unbiased() {
        let plan = SamplePlan::new(40_000, 3, 5);
        let mut strata = plan.strata(&[0.0, 0.0], 1.0, 0.5);
        strata.extend(plan.strata(&[0.3, 0.0], 1.3, 0.5));
        let e = estimate(&strata, 5, 1, |t| {
            let r2 = t[0] * t[0] + t[1] * t[1];
            Ok(vec![Complex64::new(if r2 <= 1.0 { r2 } else { 0.0 }, 0.0)])
        })
        .unwrap();
        let exact = std::f64::consts::PI / 2.0;
        assert!((e.values[0].re - exact).abs() < 3.0 * e.stderr[0] + 1e-12, "{e:?}");
    }

    #[test]
    fn bitwise_reproducible() {
        let plan = SamplePlan::new(10_000, 4, 9);
        let strata = plan.strata(&[0.1, 0.2, 0.3], 0.5, 1.0);
        let h = |t: &[f64]| Ok(vec![Complex64::new(t[0].sin(), t[1] * t[2])]);
        assert_eq!(estimate(&strata, 9, 1, h).unwrap(), estimate(&strata, 9, 1, h).unwrap());
    }
}
