use crkernel::form::{
    cf_power, cf_product_formula, koppelman, koppelman_reduced, koppelman_residual, random_section, BarrierRegistry,
};
use crkernel::rational::Cx;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[test]
fn koppelman_lemma_random_sections() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, m) in [(2, 2), (3, 2), (2, 1), (3, 3)] {
        let t = Instant::now();
        let mut reg = BarrierRegistry::new();
        let maps: Vec<_> = (0..m).map(|_| random_section(n, 2, 2, &mut rng, &mut reg)).collect();
        let res = koppelman_residual(n, &maps, &reg).unwrap();
        eprintln!("n={n} m={m} residual terms {} in {:?}", res.len(), t.elapsed());
        assert!(res.is_empty());
    }
}

#[test]
fn product_formula_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2, 3] {
        let mut reg = BarrierRegistry::new();
        let s = random_section(n, 2, 2, &mut rng, &mut reg);
        for k in 0..=2.min(n - 1) {
            let a = cf_power(n, &s, k, &reg).unwrap();
            let b = cf_product_formula(n, &s, k, &reg).unwrap();
            assert!(a.sub(&b).unwrap().is_zero(&reg), "n={n} k={k}");
        }
        let maps = vec![s.clone(), random_section(n, 2, 2, &mut rng, &mut reg)];
        let a = koppelman(n, &maps, &reg, false).unwrap();
        let b = koppelman_reduced(n, &maps, &reg, false).unwrap();
        assert!(a.sub(&b).unwrap().is_zero(&reg));
    }
}

#[test]
fn modular_zero_test_agrees_with_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in [2, 3] {
        let mut reg = BarrierRegistry::new();
        let maps = vec![random_section(n, 2, 2, &mut rng, &mut reg), random_section(n, 2, 2, &mut rng, &mut reg)];
        let a = koppelman(n, &maps, &reg, false).unwrap();
        let b = koppelman_reduced(n, &maps, &reg, false).unwrap();
        let same = a.sub(&b).unwrap();
        assert_eq!(same.is_zero_modular(&reg, 3, 1), Some(true));
        let dbar_a = a.dbar(&reg);
        assert_eq!(dbar_a.is_zero_modular(&reg, 3, 1), Some(dbar_a.normalize(&reg).is_empty()));
        let off = a.sub(&b.scale(&Cx::int(2))).unwrap();
        assert_eq!(off.is_zero_modular(&reg, 1, 2), Some(false));
        assert!(!off.normalize(&reg).is_empty());
    }
}
