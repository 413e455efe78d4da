use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crkernel::barrier::{validate_barrier, ModelManifold};
use crkernel::kernels::{BundleOptions, KernelBundle};
use crkernel::par;
use crkernel::poly::Poly;
use crkernel::quadrature::{apply_operator, Patch, SamplePlan, TestForm};
use crkernel::simplicial::Vertex;

fn paths(c: &mut Criterion) {
    let model = ModelManifold::model_a();
    let mut bundle = KernelBundle::build(&model, &BundleOptions { validate_samples: 1000, ..Default::default() }).unwrap();
    let patch = Patch::new(&model, model.radius.to_f64()).unwrap();
    let r1 = bundle.extract_solution_kernel(1).unwrap();
    let f = TestForm::new(&patch, &[0.0; 5], 0.1, vec![(vec![0, 1], Poly::one())]).unwrap();
    let z = [0.02, -0.01, 0.03, 0.0, 0.01];
    let plan = SamplePlan::new(20_000, 8, 1);
    let datum = bundle.datum(&Vertex::unit(1, 1)).unwrap().clone();

    let mut g = c.benchmark_group("paths");
    g.sample_size(10);
    for (name, seq) in [("parallel", false), ("sequential", true)] {
        g.bench_function(BenchmarkId::new("apply_operator_20k", name), |b| {
            par::force_sequential(seq);
            b.iter(|| apply_operator(&f, &r1, &bundle.reg, &patch, &z, &plan, None).unwrap())
        });
        g.bench_function(BenchmarkId::new("barrier_validation_20k", name), |b| {
            par::force_sequential(seq);
            b.iter(|| validate_barrier(&datum, &bundle.reg, 20_000, 3).unwrap())
        });
    }
    par::force_sequential(false);
    g.finish();
}

criterion_group!(benches, paths);
criterion_main!(benches);
