use std::sync::OnceLock;
use std::time::Instant;

use crkernel::barrier::ModelManifold;
use crkernel::form::koppelman_reduced;
use crkernel::kernels::{solution_range, BundleOptions, Identity, IndexSet, KernelBundle, KernelError};
use crkernel::rational::{Cx, Rational};
use crkernel::simplicial::{Chain, Simplex, Vertex};

fn model_a() -> &'static KernelBundle {
    static B: OnceLock<KernelBundle> = OnceLock::new();
    B.get_or_init(|| {
        let t = Instant::now();
        let b = KernelBundle::build(&ModelManifold::model_a(), &BundleOptions::default()).unwrap();
        eprintln!("model A bundle: {:?}", t.elapsed());
        b
    })
}

fn e(j: i32) -> Vertex {
    Vertex::unit(1, j)
}

#[test]
fn model_a_choices() {
    let b = model_a();
    assert_eq!(b.m, 0);
    assert_eq!(b.depth.selected, Ok(0));
    assert_eq!(b.apex, e(1));
    assert_eq!(b.data.len(), 2);
    for (_, rep) in &b.validation {
        assert_eq!(rep.samples, 100_000);
        assert!(rep.min_slack >= -1e-12);
    }
}

#[test]
fn model_a_kernel_shapes() {
    let b = model_a();
    let reg = &b.reg;
    let g = |j| b.data[&e(j)].section.clone();
    let n = 3;
    let r_expect = koppelman_reduced(n, &[g(1), g(-1)], reg, false).unwrap().scale(&Cx::int(-1));
    assert!(b.r().unwrap().sub(&r_expect).unwrap().is_zero(reg));
    let k_expect = koppelman_reduced(n, &[b.bm.clone(), g(1)], reg, false)
        .unwrap()
        .sub(&koppelman_reduced(n, &[b.bm.clone(), g(-1)], reg, false).unwrap())
        .unwrap();
    assert!(b.k().unwrap().sub(&k_expect).unwrap().is_zero(reg));
    let e_expect = koppelman_reduced(n, &[b.bm.clone(), g(1), g(-1)], reg, false).unwrap().scale(&Cx::int(-1));
    assert!(b.e().unwrap().sub(&e_expect).unwrap().is_zero(reg));
    let one = IndexSet::new(vec![1]).unwrap();
    assert!(b.b_i(&one).unwrap().sub(&b.bmk().unwrap()).unwrap().is_zero(reg));
    assert!(b.b_i(&one).unwrap().sub(&b.b_i_alt(&one).unwrap()).unwrap().is_zero(reg));
    // dz̄-degree of Ω(G_{e₁}) is at most n − (q + k) = 1.
    let single = b.omega(&Chain::simplex(Simplex(vec![e(1)]))).unwrap();
    assert!(single.bidegree_part(0, 2).is_zero(reg));
    assert!(!single.bidegree_part(0, 1).is_zero(reg));
}

#[test]
fn model_a_identities_vanish() {
    let b = model_a();
    for id in Identity::ALL {
        let t = Instant::now();
        let res = b.verify_identity(id).unwrap();
        eprintln!("{}: {} terms left, {:?}", id.name(), res.len(), t.elapsed());
        assert!(res.is_zero(&b.reg), "{} residual nonzero", id.name());
    }
}

#[test]
fn model_a_structure_and_extraction() {
    let b = model_a();
    let rep = b.structure_check().unwrap();
    assert!(rep.terms > 0 && rep.max_leray_barriers == 1);
    let mut b2 = KernelBundle::build(&ModelManifold::model_a(), &BundleOptions { validate_samples: 1000, ..Default::default() })
        .unwrap();
    let r2 = b2.extract_solution_kernel(2).unwrap();
    assert_eq!((r2.sign, r2.swapped), (1, false));
    assert!(r2.expr.sub(&b2.r().unwrap().bidegree_part(0, 2)).unwrap().is_zero(&b2.reg));
    let r0 = b2.extract_solution_kernel(0).unwrap();
    assert!(r0.swapped);
    assert!(!r0.expr.is_zero(&b2.reg));
    assert!(matches!(b2.extract_solution_kernel(3), Err(KernelError::Range { .. })));
}

#[test]
fn solution_ranges() {
    assert!(solution_range(3, 1, 1, 0).unwrap());
    assert!(!solution_range(3, 1, 1, 1).unwrap());
    assert!(solution_range(4, 1, 1, 1).is_err());
    assert!(solution_range(4, 1, 1, 4).is_err());
}

#[test]
fn model_b_override_bundle() {
    let t = Instant::now();
    let opts = BundleOptions { m_override: Some(0), ..Default::default() };
    let b = KernelBundle::build(&ModelManifold::model_b(), &opts).unwrap();
    eprintln!("model B bundle: {:?}, {} data", t.elapsed(), b.data.len());
    assert!(b.depth.selected.as_ref().unwrap_err().contains("common positive dimension 2 < 3"));
    assert_eq!(b.depth.used, 0);
    assert_eq!(b.apex, Vertex::new(vec![Rational::new(1, 2), Rational::new(1, 2)]));
    for id in Identity::ALL {
        let t = Instant::now();
        let zero = b.verify_identity(id).unwrap().is_zero(&b.reg);
        eprintln!("{}: zero {zero}, {:?}", id.name(), t.elapsed());
        // Only the lemma needing a common positive subspace of dimension q + k fails.
        assert_eq!(zero, id != Identity::HighDegreeClosed, "{}", id.name());
    }
}
