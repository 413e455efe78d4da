use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use crkernel::barrier::ModelManifold;
use crkernel::form::{bit, Wedge, GROUP_ANTI_ZETA};
use crkernel::kernels::{BundleOptions, KernelBundle, SolutionKernel};
use crkernel::poly::{Poly, Var};
use crkernel::quadrature::*;
use crkernel::rational::Cx;
use crkernel::sampling;

struct Fixture {
    bundle: KernelBundle,
    patch: Patch,
    r1: SolutionKernel,
    r0: SolutionKernel,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let model = ModelManifold::model_a();
        let mut bundle =
            KernelBundle::build(&model, &BundleOptions { validate_samples: 1000, ..Default::default() }).unwrap();
        let patch = Patch::new(&model, model.radius.to_f64()).unwrap();
        let r1 = bundle.extract_solution_kernel(1).unwrap();
        let r0 = bundle.extract_solution_kernel(0).unwrap();
        Fixture { bundle, patch, r1, r0 }
    })
}

fn bump_02(patch: &Patch, p: Poly) -> TestForm {
    TestForm::new(patch, &[0.0; 5], 0.1, vec![(vec![0, 1], p)]).unwrap()
}

fn random_t(rng: &mut impl Rng, r: f64) -> Vec<f64> {
    (0..5).map(|_| rng.random_range(-r..r)).collect()
}

const Z: [f64; 5] = [0.02, -0.01, 0.03, 0.0, 0.01];

#[test]
fn patch_invariants() {
    let fx = fixture();
    let p = &fx.patch;
    assert_eq!(p.dim(), 5);
    assert_eq!(p.orientation, -1.0);
    let mut rng = sampling::stream(3, 0);
    for _ in 0..200 {
        let t = random_t(&mut rng, 0.45);
        let e = p.embed(&t).unwrap();
        assert!(p.residual(&e.zeta) <= 1e-12);
        assert_eq!(p.jacobian_rank(&e), 5);
        let back = p.chart(&e.zeta);
        assert!(back.iter().zip(&t).all(|(a, b)| (a - b).abs() < 1e-14));
    }
    assert!(matches!(p.embed(&[0.6, 0.0, 0.0, 0.0, 0.0]), Err(QuadratureError::OutsidePatch(_))));
    assert!(matches!(p.embed(&[0.0; 4]), Err(QuadratureError::Dimension(_))));
}

#[test]
fn carry_is_an_affine_automorphism() {
    let p = &fixture().patch;
    let from = p.embed(&Z).unwrap().zeta;
    let to_t = [0.03, -0.02, 0.01, 0.02, -0.04];
    let to = p.embed(&to_t).unwrap().zeta;
    let c = p.carry(&from, &to).unwrap();
    assert!(c.apply(&Z).iter().zip(&to_t).all(|(a, b)| (a - b).abs() < 1e-14));
    // ρ̂ = 2 Re w + |z₁|² − |z₂|²: ℓ(z′) = ā₁z₁ − ā₂z₂.
    let (a1, a2) = (to[0] - from[0], to[1] - from[1]);
    let ell = |z: &[Complex64]| a1.conj() * z[0] - a2.conj() * z[1];
    let shift = to[2] - from[2] + ell(&from);
    let mut rng = sampling::stream(4, 0);
    for _ in 0..50 {
        let t = random_t(&mut rng, 0.3);
        let z = p.embed(&t).unwrap().zeta;
        let w = p.embed(&c.apply(&t)).unwrap().zeta;
        assert!((w[0] - z[0] - a1).norm() < 1e-13 && (w[1] - z[1] - a2).norm() < 1e-13);
        assert!((w[2] - (z[2] - ell(&z) + shift)).norm() < 1e-12);
    }
}

#[test]
fn compiled_kernel_matches_symbolic_evaluation() {
    let fx = fixture();
    let reg = &fx.bundle.reg;
    let expr = fx.r1.expr.clone();
    let plain = CompiledForm::new(&expr, reg);
    let scaled = CompiledForm::kernel(&expr, reg);
    let c = kernel_constant(3);
    assert!((c - Complex64::new(0.0, 1.0) / (8.0 * std::f64::consts::PI.powi(3))).norm() < 1e-15);
    let z = fx.patch.embed(&Z).unwrap().zeta;
    let mut rng = sampling::stream(5, 0);
    for _ in 0..20 {
        let zeta = fx.patch.embed(&random_t(&mut rng, 0.15)).unwrap().zeta;
        let want = expr.evaluate(reg, &zeta, &z, 0.0).unwrap();
        let got = plain.eval(&zeta, &z).unwrap();
        let got_scaled = scaled.eval(&zeta, &z).unwrap();
        for (w, v) in &want.coefs {
            let i = plain.wedges().iter().position(|x| x == w).unwrap();
            assert!((got[i] - v).norm() <= 1e-9 * (1.0 + v.norm()));
            assert!((got_scaled[i] - v * c).norm() <= 1e-9 * (1.0 + v.norm()));
        }
    }
}

#[test]
fn zero_form_gives_zero() {
    let fx = fixture();
    let plan = SamplePlan::new(2000, 6, 1);
    let f = TestForm::zero(&fx.patch, 2);
    let v = apply_operator(&f, &fx.r1, &fx.bundle.reg, &fx.patch, &Z, &plan, None).unwrap();
    assert!(v.estimate.values.iter().all(|c| c.norm() == 0.0));
    let rep = homotopy_check(&f, &fx.r1, &fx.bundle.reg, &fx.patch, &[Z.to_vec()], 0.02, &plan).unwrap();
    assert_eq!(rep.relative, 0.0);
}

#[test]
fn operator_is_linear_and_reproducible() {
    let fx = fixture();
    let plan = SamplePlan::new(8000, 8, 11);
    let f = bump_02(&fx.patch, Poly::one());
    let run = |f: &TestForm, plan: &SamplePlan| {
        apply_operator(f, &fx.r1, &fx.bundle.reg, &fx.patch, &Z, plan, None).unwrap().estimate
    };
    let base = run(&f, &plan);
    assert_eq!(base, run(&f, &plan));
    assert_ne!(base.values, run(&f, &plan.with_seed(12)).values);
    for c in [Cx::int(2), Cx::i()] {
        let scaled = run(&f.scaled(&fx.patch, &c).unwrap(), &plan);
        let cf = c.to_c64();
        for ((a, b), se) in scaled.values.iter().zip(&base.values).zip(&base.stderr) {
            assert!((a - b * cf).norm() <= 3.0 * se * cf.norm() + 1e-12);
        }
    }
    let tight = apply_operator(&f, &fx.r1, &fx.bundle.reg, &fx.patch, &Z, &plan, Some(1e-9));
    assert!(matches!(tight, Err(QuadratureError::Tolerance { .. })));
}

#[test]
fn stderr_shrinks_like_inverse_root() {
    let fx = fixture();
    let f = bump_02(&fx.patch, Poly::one());
    // The stderr estimate is noisy itself; average it over seeds.
    let se = |n| {
        (1..=6)
            .map(|seed| {
                apply_operator(&f, &fx.r1, &fx.bundle.reg, &fx.patch, &Z, &SamplePlan::new(n, 8, seed), None)
                    .unwrap()
                    .estimate
                    .max_stderr()
            })
            .sum::<f64>()
    };
    let ratio = se(20_000) / se(10_000);
    assert!((0.6..0.82).contains(&ratio), "ratio {ratio}");
}

#[test]
fn shells_integrate_closed_form_singularity() {
    // ∫_{|t| ≤ ρ} |t|^{-3} dt over ℝ⁵ = |S⁴| ρ² / 2 with |S⁴| = 8π²/3.
    let rho = 0.3;
    let plan = SamplePlan::new(40_000, 8, 9);
    let strata = plan.strata(&[0.0; 5], rho, 1.0);
    let est = estimate(&strata, plan.seed, 1, |t| {
        let r = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(vec![Complex64::new(r.powi(-3), 0.0)])
    })
    .unwrap();
    let exact = 8.0 * std::f64::consts::PI.powi(2) / 3.0 * rho * rho / 2.0;
    assert!((est.values[0].re - exact).abs() <= 3.0 * est.stderr[0], "{est:?} vs {exact}");
}

#[test]
fn tangential_dbar_of_test_forms() {
    let fx = fixture();
    let p = &fx.patch;
    let f = TestForm::new(p, &[0.0; 5], 0.2, vec![(vec![], Poly::var(Var::Wb(0)))]).unwrap();
    // Outside the support the form is locally constant (zero).
    assert!(dbar_b_numeric(&f, p, &[0.3, 0.0, 0.0, 0.0, 0.0]).unwrap().iter().all(|c| c.norm() == 0.0));
    let mut rng = sampling::stream(6, 0);
    let alt = f.reextended(p, &fx.bundle.model.rho_hat[0], &(&Poly::var(Var::W(1)) + &Poly::one())).unwrap();
    for _ in 0..100 {
        let t = random_t(&mut rng, 0.1);
        let e = p.embed(&t).unwrap();
        let frame = p.tangent_frame(&e.zeta).unwrap();
        // Product rule: ∂̄(ζ̄₁ b) = b dζ̄₁ + ζ̄₁ ∂̄b.
        let (b, db) = f.bump.eval(&e.zeta);
        let want: Vec<(Wedge, Complex64)> = (0..3)
            .map(|j| (bit(GROUP_ANTI_ZETA, j), e.zeta[0].conj() * db[j] + if j == 0 { b } else { 0.0 }))
            .collect();
        let want = tangential(&want, GROUP_ANTI_ZETA, &frame, 1);
        let got = dbar_b_numeric(&f, p, &t).unwrap();
        assert!(got.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-12));
        let other = dbar_b_numeric(&alt, p, &t).unwrap();
        assert!(got.iter().zip(&other).all(|(a, b)| (a - b).norm() <= 1e-10));
    }
}

#[test]
fn holder_difference_vanishes_at_zero_separation() {
    let fx = fixture();
    let r = CompiledForm::kernel(&fx.bundle.r().unwrap(), &fx.bundle.reg);
    let plan = SamplePlan::new(2000, 6, 1);
    let rep = holder_probe(&r, &fx.patch, &Z, &[1.0, 0.0, 0.0, 0.0, 0.0], &[0.0], 0.1, false, &plan).unwrap();
    assert_eq!(rep.rows[0].value, 0.0);
}

#[test]
fn scaling_probe_rejects_bad_radii() {
    let fx = fixture();
    let r = CompiledForm::kernel(&fx.bundle.r().unwrap(), &fx.bundle.reg);
    let plan = SamplePlan::new(1000, 4, 1);
    let err = scaling_probe(&r, &fx.patch, &Z, &[0.1, 0.2, 0.05, 0.01], 0, &plan);
    assert!(matches!(err, Err(QuadratureError::BadPlan(_))));
}

#[test]
fn homotopy_reproduces_forms_at_moderate_plan() {
    let fx = fixture();
    let plan = SamplePlan::new(60_000, 8, 7);
    let pts = vec![Z.to_vec(), vec![-0.04, 0.02, 0.0, 0.03, -0.02]];
    let f = bump_02(&fx.patch, Poly::one());
    let top = homotopy_check(&f, &fx.r1, &fx.bundle.reg, &fx.patch, &pts, 0.02, &plan).unwrap();
    assert!(top.relative < 0.4, "{top:?}");
    let phi = TestForm::new(&fx.patch, &[0.0; 5], 0.1, vec![(vec![], Poly::one())]).unwrap();
    let low = homotopy_check(&phi, &fx.r0, &fx.bundle.reg, &fx.patch, &pts, 0.02, &plan).unwrap();
    assert!(low.relative < 0.4, "{low:?}");
    let wrong = homotopy_check(&f, &fx.r0, &fx.bundle.reg, &fx.patch, &pts, 0.02, &plan);
    assert!(matches!(wrong, Err(QuadratureError::Unsupported(_))));
}

#[test]
fn sequential_path_matches_the_pool() {
    let fx = fixture();
    let f = bump_02(&fx.patch, Poly::one());
    let plan = SamplePlan::new(9000, 6, 21);
    let run = || apply_operator(&f, &fx.r1, &fx.bundle.reg, &fx.patch, &Z, &plan, None).unwrap().estimate;
    let pooled = run();
    crkernel::par::force_sequential(true);
    let seq = run();
    crkernel::par::force_sequential(false);
    assert_eq!(pooled, seq);
}
