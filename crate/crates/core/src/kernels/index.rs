//! Signed index sets `I ⊂ {±1, …, ±k}` with pairwise distinct moduli.

use std::fmt;

use crate::simplicial::{Simplex, Vertex};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(Vec<i32>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("index 0 is not allowed")]
    Zero,
    #[error("repeated modulus {0}")]
    RepeatedModulus(i32),
}

impl IndexSet {
    /// Sorts by modulus; rejects 0 and repeated moduli.
    pub fn new(mut elems: Vec<i32>) -> Result<Self, IndexError> {
        if elems.contains(&0) {
            return Err(IndexError::Zero);
        }
        elems.sort_by_key(|j| j.unsigned_abs());
        if let Some(w) = elems.windows(2).find(|w| w[0].unsigned_abs() == w[1].unsigned_abs()) {
            return Err(IndexError::RepeatedModulus(w[1].abs()));
        }
        Ok(IndexSet(elems))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn elements(&self) -> &[i32] {
        &self.0
    }

    /// `I_ν`, 1-based.
    pub fn get(&self, nu: usize) -> i32 {
        self.0[nu - 1]
    }

    /// `I(ν̂) = I ∖ {I_ν}`, 1-based.
    pub fn delete(&self, nu: usize) -> IndexSet {
        let mut v = self.0.clone();
        v.remove(nu - 1);
        IndexSet(v)
    }

    /// `+1` for an even number of negative elements, else `−1`.
    pub fn sgn(&self) -> i64 {
        if self.0.iter().filter(|j| **j < 0).count() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// `σ_I = [e_{I_1}, …, e_{I_|I|}]` in `ℝᵏ`.
    pub fn sigma(&self, k: usize) -> Simplex {
        Simplex(self.0.iter().map(|&j| Vertex::unit(k, j)).collect())
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|j| j.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `ℐ(ℓ)`: all admissible sets of size `ℓ` over `{±1, …, ±k}`.
pub fn index_sets(k: usize, l: usize) -> Vec<IndexSet> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        if mask.count_ones() as usize != l {
            continue;
        }
        let mods: Vec<i32> = (1..=k as i32).filter(|j| mask & (1 << (j - 1)) != 0).collect();
        for signs in 0u32..(1 << l) {
            let v = mods.iter().enumerate().map(|(i, &j)| if signs & (1 << i) != 0 { -j } else { j }).collect();
            out.push(IndexSet(v));
        }
    }
    out.sort();
    out
}

/// `ℐ′(ℓ)`: sets `{j_1, …, j_ℓ}` with `|j_ν| = ν`, in sign-lexicographic order
/// starting from `{1, …, ℓ}`.
pub fn index_sets_prime(l: usize) -> Vec<IndexSet> {
    (0u32..(1 << l))
        .map(|signs| IndexSet((1..=l as i32).map(|j| if signs & (1 << (j - 1)) != 0 { -j } else { j }).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplicial::Chain;

    #[test]
    fn k1_sets_and_signs() {
        let sets = index_sets_prime(1);
        assert_eq!(sets, vec![IndexSet::new(vec![1]).unwrap(), IndexSet::new(vec![-1]).unwrap()]);
        assert_eq!(sets[0].sgn(), 1);
        assert_eq!(sets[1].sgn(), -1);
    }

    #[test]
    fn k2_ordering_and_deletion() {
        let i = IndexSet::new(vec![-2, 1]).unwrap();
        assert_eq!((i.get(1), i.get(2), i.sgn()), (1, -2, -1));
        assert_eq!(i.delete(2), IndexSet::new(vec![1]).unwrap());
        assert!(IndexSet::new(vec![2, -2]).is_err());
    }

    #[test]
    fn counts() {
        for l in 1..=4 {
            assert_eq!(index_sets_prime(l).len(), 1 << l);
        }
        assert_eq!(index_sets(3, 2).len(), 3 * 4);
        assert_eq!(index_sets(2, 1).len(), 4);
    }

    #[test]
    fn signed_boundaries_cancel() {
        for k in 1..=3 {
            let mut acc = Chain::zero();
            for i in index_sets_prime(k) {
                acc = acc.add(&Chain::simplex(i.sigma(k)).boundary().unwrap().scale(i.sgn()));
            }
            assert!(acc.is_zero(), "k = {k}: {acc:?}");
        }
    }
}
