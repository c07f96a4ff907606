//! Sequential against rayon-parallel execution for the two data-parallel
//! stages: snapshot assembly and held-out error evaluation.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use podnn::analysis;
use podnn::exec::Execution;
use podnn::nn::{size_apriori, Mlp};
use podnn::pod::{self, RankSelection};
use podnn::problem::{ModelProblem, ModelProblemConfig};
use podnn::qmc::{self, QmcConfig, RateConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn snapshot_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("snapshot_assembly");
    group.sample_size(10);
    for (kind, cfg) in [
        ("real", ModelProblemConfig::real_diffusion(256, 64)),
        ("complex", ModelProblemConfig::complex_reaction(256, 64)),
    ] {
        let problem = ModelProblem::new(&cfg).unwrap();
        let points = qmc::parameter_points(&QmcConfig::new(64, 1024)).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, kind), &exec, |b, &exec| {
                b.iter(|| pod::assemble_snapshots_with(&problem, black_box(&points), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn test_evaluation(c: &mut Criterion) {
    let cfg = ModelProblemConfig::complex_reaction(256, 32);
    let problem = ModelProblem::new(&cfg).unwrap();
    let train = qmc::parameter_points(&QmcConfig::new(32, 256)).unwrap();
    let snap = pod::assemble_snapshots(&problem, &train).unwrap();
    let (full, _) = pod::pod_basis(&snap, problem.gram()).unwrap();
    let basis = full
        .truncated(full.rank.min(10), RankSelection::Fixed)
        .unwrap();
    let sizing = size_apriori(256, &RateConfig::default()).unwrap();
    let model = Mlp::init(&sizing.dims(32, 2 * basis.rank), 0).unwrap();
    let test = qmc::parameter_points(&QmcConfig::new(32, 512).with_start(257)).unwrap();

    let mut group = c.benchmark_group("test_evaluation");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                analysis::error_breakdown_with(&model, &problem, &basis, black_box(&test), exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, snapshot_assembly, test_evaluation);
criterion_main!(benches);
