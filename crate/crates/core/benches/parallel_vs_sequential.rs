use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsobs::lmi::robust_stability_sampling;
use tsobs::random::{random_dimensions, random_param_affine_model, RandomScales};
use tsobs::simulator::{run_batch, InputSignal};
use tsobs::{example, parallel, snl_decompose, solve_design, DesignSpec, Execution, ObserverDesign, TsModel};

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn example_design() -> (TsModel, ObserverDesign) {
    let model = snl_decompose(&example::param_affine_model()).unwrap();
    let design = solve_design(&model, &example::design_spec()).unwrap();
    (model, design)
}

fn sampling(c: &mut Criterion) {
    let (model, design) = example_design();
    let mut group = c.benchmark_group("robust_sampling");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::new(name, 20_000), |b| {
            b.iter(|| robust_stability_sampling(&model, &design, 0.5, 20_000, 7, exec))
        });
    }
    group.finish();
}

fn scenario_sweep(c: &mut Criterion) {
    let (model, design) = example_design();
    let scenarios: Vec<_> = (0..8u64)
        .map(|seed| {
            let mut sc = example::scenario(5.0, 1e-3);
            sc.input = InputSignal::Prbs { amplitude: 0.5, dwell: 0.5, seed };
            sc
        })
        .collect();
    let mut group = c.benchmark_group("scenario_sweep");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::new(name, scenarios.len()), |b| {
            b.iter(|| run_batch(&model, &design, &scenarios, exec))
        });
    }
    group.finish();
}

fn design_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let models: Vec<TsModel> = (0..6)
        .map(|_| {
            let dims = random_dimensions(&mut rng, 3, 1, 2);
            snl_decompose(&random_param_affine_model(&mut rng, dims, RandomScales::default())).unwrap()
        })
        .collect();
    let spec = DesignSpec::default();
    let mut group = c.benchmark_group("design_batch");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::new(name, models.len()), |b| {
            b.iter(|| parallel::map(exec, &models, |m| solve_design(m, &spec).is_ok()))
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, scenario_sweep, design_batch);
criterion_main!(benches);
