//! Assembly of the fundamental-solution kernels from Leray data over
//! subdivided direction simplices, with exact identity checks.

mod assemble;
pub mod index;

use std::collections::BTreeMap;
use std::sync::Mutex;

use rustc_hash::FxHashMap;

pub use assemble::{solution_range, Identity, SolutionKernel, StructureReport};
pub use index::{index_sets, index_sets_prime, IndexError, IndexSet};

use crate::barrier::{self, BarrierError, BarrierReport, LerayDatum, LerayOptions, ModelManifold};
use crate::form::{bochner_martinelli, BarrierRegistry, FormError, FormExpr, Section};
use crate::linalg::{self, CMat};
use crate::rational::Rational;
use crate::simplicial::{self, Chain, ChainError, Simplex, Vertex};

#[derive(Debug, Clone, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("no subdivision depth m <= {m_max} makes the positive subspaces agree: {detail}")]
    DepthExceeded { m_max: usize, detail: String },
    #[error("vanishing check failed at depth {m}: {detail}")]
    Vanishing { m: usize, detail: String },
    #[error("no admissible apex among {budget} candidates")]
    ApexExhausted { budget: usize },
    #[error("apex {0:?} is not admissible")]
    BadApex(Vertex),
    #[error("no Leray datum for direction {0:?}")]
    Unregistered(Vertex),
    #[error("form degree {r} outside [0, {lo_hi}] and [{up_lo}, {up_hi}]")]
    Range { r: usize, lo_hi: i64, up_lo: i64, up_hi: i64 },
    #[error("structure check failed: {0}")]
    Structure(String),
}

#[derive(Clone, Debug)]
pub struct BundleOptions {
    pub m_max: usize,
    pub apex_budget: usize,
    /// Use this depth instead of the exact selection (the selection still
    /// runs and its outcome is recorded).
    pub m_override: Option<usize>,
    pub apex_override: Option<Vertex>,
    pub leray: LerayOptions,
    /// Samples for the final barrier validation of every direction.
    pub validate_samples: usize,
}

impl Default for BundleOptions {
    fn default() -> Self {
        BundleOptions {
            m_max: 4,
            apex_budget: 64,
            m_override: None,
            apex_override: None,
            leray: LerayOptions::default(),
            validate_samples: 100_000,
        }
    }
}

/// Outcome of the exact depth selection.
#[derive(Clone, Debug)]
pub struct DepthSelection {
    pub selected: Result<usize, String>,
    pub used: usize,
}

/// Leray data keyed by direction, sharing one registry.
pub struct DataTable<'m> {
    pub model: &'m ModelManifold,
    pub reg: BarrierRegistry,
    pub data: BTreeMap<Vertex, LerayDatum>,
    opts: LerayOptions,
}

impl<'m> DataTable<'m> {
    pub fn new(model: &'m ModelManifold, opts: LerayOptions) -> Self {
        DataTable { model, reg: BarrierRegistry::new(), data: BTreeMap::new(), opts }
    }

    pub fn ensure(&mut self, v: &Vertex) -> Result<&LerayDatum, KernelError> {
        if !self.data.contains_key(v) {
            let d = barrier::leray(self.model, v.coords(), &self.opts, &mut self.reg)?;
            self.data.insert(v.clone(), d);
        }
        Ok(&self.data[v])
    }

    pub fn ensure_chain(&mut self, c: &Chain) -> Result<(), KernelError> {
        for (s, _) in c.terms() {
            for v in s.vertices() {
                self.ensure(v)?;
            }
        }
        Ok(())
    }
}

/// All `σ_I` for `I ∈ ℐ′(ℓ)`, `1 ≤ ℓ ≤ k`.
pub fn all_sigmas(k: usize) -> Vec<(IndexSet, Simplex)> {
    (1..=k).flat_map(|l| index_sets_prime(l).into_iter().map(move |i| (i.clone(), i.sigma(k)))).collect()
}

fn intersection_dim(qs: &[&CMat], n: usize) -> usize {
    let stacked: CMat = qs.iter().flat_map(|q| q.iter().cloned()).collect();
    n - linalg::rank(&stacked)
}

/// Smallest `m ≤ m_max` such that every simplex of every `sd^m(σ_I)` has
/// positive subspaces intersecting in dimension at least `q + k`.
pub fn select_m(table: &mut DataTable<'_>, m_max: usize) -> Result<usize, KernelError> {
    let (n, need) = (table.model.n, table.model.q + table.model.k);
    let sigmas = all_sigmas(table.model.k);
    let mut detail = String::new();
    for m in 0..=m_max {
        let mut ok = true;
        'outer: for (i, s) in &sigmas {
            let c = Chain::simplex(s.clone()).subdivide(m)?;
            table.ensure_chain(&c)?;
            for (tau, _) in c.terms() {
                let qs: Vec<&CMat> = tau.vertices().iter().map(|v| &table.data[v].q).collect();
                let dim = intersection_dim(&qs, n);
                if dim < need {
                    detail = format!("I = {i}, simplex {:?} at m = {m}: common positive dimension {dim} < {need}", tau.0);
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            return Ok(m);
        }
    }
    Err(KernelError::DepthExceeded { m_max, detail })
}

/// Condition on the apex: for every `k`-simplex `τ` of every `sd^m(σ_I)`,
/// `I ∈ ℐ′(k)`, each `k` of the vectors `[ν*, τ]` are independent.
pub fn apex_admissible(k: usize, m: usize, apex: &Vertex) -> Result<bool, KernelError> {
    let l1 = apex.coords().iter().fold(Rational::ZERO, |s, x| &s + &x.abs());
    if apex.dim() != k || !l1.is_one() {
        return Ok(false);
    }
    for i in index_sets_prime(k) {
        let c = Chain::simplex(i.sigma(k)).subdivide(m)?;
        for (tau, _) in c.terms() {
            let mut all = vec![apex.clone()];
            all.extend(tau.vertices().iter().cloned());
            for skip in 0..all.len() {
                let rows: Vec<Vec<Rational>> =
                    all.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, v)| v.0.clone()).collect();
                if simplicial::rank(&rows) < k {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Deterministic apex search: barycenters of each `Δ_I`, then dyadic
/// perturbations of them, at most `budget` candidates.
pub fn select_apex(k: usize, m: usize, budget: usize) -> Result<Vertex, KernelError> {
    let mut tried = 0;
    for e in 0..=8u32 {
        for i in index_sets_prime(k) {
            for shift in 0..k {
                if e == 0 && shift > 0 {
                    continue;
                }
                // Weights 1 + 2^-e on coordinate `shift`, 1 elsewhere, normalized.
                let mut w: Vec<Rational> = vec![Rational::ONE; k];
                if e > 0 {
                    w[shift] = &Rational::ONE + &Rational::new(1, 1 << e);
                }
                let total = w.iter().fold(Rational::ZERO, |s, x| &s + x);
                let coords = (0..k)
                    .map(|j| &(&w[j] / &total) * &Rational::from_int(i.get(j + 1).signum() as i64))
                    .collect();
                let cand = Vertex::new(coords);
                tried += 1;
                if apex_admissible(k, m, &cand)? {
                    return Ok(cand);
                }
                if tried >= budget {
                    return Err(KernelError::ApexExhausted { budget });
                }
            }
        }
    }
    Err(KernelError::ApexExhausted { budget })
}

/// Leray data for all directions, the chosen depth and apex, and cached
/// `Ω` expansions.
pub struct KernelBundle {
    pub model: ModelManifold,
    pub reg: BarrierRegistry,
    pub data: BTreeMap<Vertex, LerayDatum>,
    pub bm: Section,
    pub m: usize,
    pub depth: DepthSelection,
    pub apex: Vertex,
    pub validation: Vec<(Vertex, BarrierReport)>,
    cache: Mutex<FxHashMap<(bool, Simplex), FormExpr>>,
}

impl KernelBundle {
    pub fn build(model: &ModelManifold, opts: &BundleOptions) -> Result<Self, KernelError> {
        barrier::convexify(model)?;
        // Calibrate on at least as many samples as the final validation,
        // which then runs on an independent stream.
        let mut lopts = opts.leray.clone();
        lopts.samples = lopts.samples.max(opts.validate_samples);
        let mut table = DataTable::new(model, lopts);
        let selected = select_m(&mut table, opts.m_max).map_err(|e| e.to_string());
        let m = match (opts.m_override, &selected) {
            (Some(m), _) => m,
            (None, Ok(m)) => *m,
            (None, Err(_)) => return Err(select_m(&mut table, opts.m_max).unwrap_err()),
        };
        let apex = match &opts.apex_override {
            Some(a) if apex_admissible(model.k, m, a)? => a.clone(),
            Some(a) => return Err(KernelError::BadApex(a.clone())),
            None => select_apex(model.k, m, opts.apex_budget)?,
        };
        for (_, s) in all_sigmas(model.k) {
            for i in 0..=m {
                table.ensure_chain(&Chain::simplex(s.clone()).subdivide(i)?)?;
            }
        }
        table.ensure(&apex)?;
        let DataTable { reg: mut treg, data, .. } = table;
        let bm = bochner_martinelli(model.n, &mut treg);
        let keys: Vec<&Vertex> = data.keys().collect();
        let reports = crate::par::map_vec(&keys, |v| {
            barrier::validate_barrier(&data[*v], &treg, opts.validate_samples, opts.leray.seed ^ 0x9e37)
        });
        let mut validation = Vec::new();
        for (v, r) in keys.into_iter().zip(reports) {
            validation.push((v.clone(), r?));
        }
        let needed = model.q + model.k;
        for d in data.values() {
            d.check_invariants(&treg, needed)?;
        }
        let bundle = KernelBundle {
            model: model.clone(),
            reg: treg,
            data,
            bm,
            m,
            depth: DepthSelection { selected, used: m },
            apex,
            validation,
            cache: Mutex::new(FxHashMap::default()),
        };
        if opts.m_override.is_none() {
            bundle.assert_vanishing()?;
        }
        Ok(bundle)
    }

    /// Smallest calibrated neighborhood radius over all directions.
    pub fn radius(&self) -> Rational {
        self.data.values().map(|d| d.radius.clone()).min().unwrap_or_else(|| self.model.radius.clone())
    }

    pub fn datum(&self, v: &Vertex) -> Result<&LerayDatum, KernelError> {
        self.data.get(v).ok_or_else(|| KernelError::Unregistered(v.clone()))
    }

    fn assert_vanishing(&self) -> Result<(), KernelError> {
        for (i, res) in self.high_degree_parts()? {
            if !res.is_zero(&self.reg) {
                return Err(KernelError::Vanishing {
                    m: self.m,
                    detail: format!("high z-bar degree part of the subdivided kernel for I = {i} is nonzero"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apex_examples() {
        assert!(apex_admissible(1, 0, &Vertex::unit(1, 1)).unwrap());
        assert_eq!(select_apex(1, 0, 64).unwrap(), Vertex::unit(1, 1));
        // Collinear with the vertex e₁ of σ_{1,2}.
        assert!(!apex_admissible(2, 0, &Vertex::unit(2, 1)).unwrap());
        let a = select_apex(2, 0, 64).unwrap();
        assert_eq!(a, Vertex::new(vec![Rational::new(1, 2), Rational::new(1, 2)]));
        assert!(select_apex(2, 1, 64).is_ok());
    }

    #[test]
    fn model_a_depth_is_zero() {
        let m = ModelManifold::model_a();
        let mut t = DataTable::new(&m, LerayOptions::default());
        assert_eq!(select_m(&mut t, 4).unwrap(), 0);
    }
}
