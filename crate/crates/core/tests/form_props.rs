use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crkernel::form::{random_section, Basis, BarrierRegistry, FormExpr};
use crkernel::poly::{mono_var, Poly, MAX_N};
use crkernel::rational::Cx;

fn random_poly(n: usize, rng: &mut ChaCha8Rng) -> Poly {
    Poly::from_terms((0..rng.random_range(1..=3)).map(|_| {
        let mut m = 0u128;
        for _ in 0..rng.random_range(0..=2) {
            m += mono_var(rng.random_range(0..4) * MAX_N + rng.random_range(0..n), 1);
        }
        (m, Cx::int(rng.random_range(-3i64..=3)))
    }))
}

/// A sum of up to three terms `p · dx_{a₁} ∧ … ∧ dx_{a_d} / Φ^e` of degree `d`.
fn random_form(n: usize, d: usize, basis: Basis, reg: &BarrierRegistry, rng: &mut ChaCha8Rng) -> FormExpr {
    let barrier = rng.random_range(0..reg.len() as u16 + 1);
    let mut acc = FormExpr::zero(n, basis);
    for _ in 0..rng.random_range(1..=3) {
        let mut t = FormExpr::scalar(n, basis, random_poly(n, rng));
        for _ in 0..d {
            let c = FormExpr::covector(n, basis, rng.random_range(0..4), rng.random_range(0..n));
            t = t.wedge(&c).unwrap();
        }
        if (barrier as usize) < reg.len() {
            t = t.divide_barrier(barrier, rng.random_range(1..=2));
        }
        acc = acc.add(&t).unwrap();
    }
    acc
}

fn setup(seed: u64, n: usize) -> (ChaCha8Rng, BarrierRegistry) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reg = BarrierRegistry::new();
    random_section(n, 1, 2, &mut rng, &mut reg);
    (rng, reg)
}

fn basis(b: bool) -> Basis {
    if b {
        Basis::Standard
    } else {
        Basis::Difference
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dbar_squares_to_zero(seed in any::<u64>(), n in 2usize..=3, d in 0usize..=2, b in any::<bool>()) {
        let (mut rng, reg) = setup(seed, n);
        let f = random_form(n, d, basis(b), &reg, &mut rng);
        prop_assert!(f.dbar(&reg).dbar(&reg).is_zero(&reg));
        prop_assert!(f.dbar_z(&reg).dbar_z(&reg).is_zero(&reg));
        prop_assert!(f.dbar_zeta(&reg).dbar_zeta(&reg).is_zero(&reg));
    }

    #[test]
    fn wedge_is_associative(seed in any::<u64>(), n in 2usize..=3, b in any::<bool>()) {
        let (mut rng, reg) = setup(seed, n);
        let (x, y, z) = (
            random_form(n, 1, basis(b), &reg, &mut rng),
            random_form(n, 2, basis(b), &reg, &mut rng),
            random_form(n, 1, basis(b), &reg, &mut rng),
        );
        let l = x.wedge(&y).unwrap().wedge(&z).unwrap();
        let r = x.wedge(&y.wedge(&z).unwrap()).unwrap();
        prop_assert!(l.sub(&r).unwrap().is_zero(&reg));
    }

    #[test]
    fn wedge_is_graded_commutative(seed in any::<u64>(), n in 2usize..=3, dx in 0usize..=2, dy in 0usize..=2) {
        let (mut rng, reg) = setup(seed, n);
        let x = random_form(n, dx, Basis::Standard, &reg, &mut rng);
        let y = random_form(n, dy, Basis::Standard, &reg, &mut rng);
        let sign = if dx * dy % 2 == 0 { 1 } else { -1 };
        let diff = x.wedge(&y).unwrap().sub(&y.wedge(&x).unwrap().scale(&Cx::int(sign))).unwrap();
        prop_assert!(diff.is_zero(&reg));
    }

    #[test]
    fn dbar_obeys_leibniz(seed in any::<u64>(), n in 2usize..=3, dx in 0usize..=2) {
        let (mut rng, reg) = setup(seed, n);
        let x = random_form(n, dx, Basis::Standard, &reg, &mut rng);
        let y = random_form(n, 1, Basis::Standard, &reg, &mut rng);
        let sign = if dx % 2 == 0 { 1 } else { -1 };
        let lhs = x.wedge(&y).unwrap().dbar(&reg);
        let rhs = x.dbar(&reg).wedge(&y).unwrap().add(&x.wedge(&y.dbar(&reg)).unwrap().scale(&Cx::int(sign))).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().is_zero(&reg));
    }

    #[test]
    fn bases_agree(seed in any::<u64>(), n in 2usize..=3, d in 0usize..=2) {
        let (mut rng, reg) = setup(seed, n);
        let f = random_form(n, d, Basis::Difference, &reg, &mut rng);
        let back = f.to_standard().to_difference();
        prop_assert!(back.sub(&f).unwrap().is_zero(&reg));
        prop_assert!(f.to_standard().dbar(&reg).sub(&f.dbar(&reg).to_standard()).unwrap().is_zero(&reg));
    }
}
