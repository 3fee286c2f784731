use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rankflow::gtgen::GtConfig;
use rankflow::pipeline::{gt_rankings, rank_scenes};
use rankflow::preprocess::extract_scene_features;
use rankflow::rankcore::rank_scene;
use rankflow::scorer::{OracleScorer, ScorerModel};
use rankflow::synth::{generate_scenes, SynthConfig};
use rankflow::{Execution, Scene};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn cfg(n: usize) -> SynthConfig {
    SynthConfig {
        n_scenes: n,
        ..SynthConfig::default()
    }
}

fn scenes(n: usize) -> Vec<Scene> {
    generate_scenes(&cfg(n), Execution::Parallel)
        .unwrap()
        .into_iter()
        .map(|s| s.scene)
        .collect()
}

fn synth(c: &mut Criterion) {
    let mut g = c.benchmark_group("synth");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 64), &mode, |b, &m| {
            b.iter(|| generate_scenes(&cfg(64), m).unwrap())
        });
    }
    g.finish();
}

fn gt_gen(c: &mut Criterion) {
    let data = scenes(256);
    let gt = GtConfig::default();
    let mut g = c.benchmark_group("gt_gen");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new(name, data.len()), &mode, |b, &m| {
            b.iter(|| gt_rankings(&data, &gt, m).unwrap())
        });
    }
    g.finish();
}

fn ranking(c: &mut Criterion) {
    let data = scenes(256);
    let features: Vec<_> = data.iter().map(extract_scene_features).collect();
    let model = ScorerModel::for_window(5, 32, 7);
    let gt = gt_rankings(&data, &GtConfig::default(), Execution::Parallel).unwrap();
    let mut g = c.benchmark_group("rank");
    for (name, mode) in MODES {
        g.bench_with_input(
            BenchmarkId::new(format!("mlp_{name}"), data.len()),
            &mode,
            |b, &m| b.iter(|| rank_scenes(&data, &features, &model, 5, m).unwrap()),
        );
        g.bench_with_input(
            BenchmarkId::new(format!("oracle_{name}"), data.len()),
            &mode,
            |b, &m| {
                b.iter(|| {
                    rankflow::exec::map_range(data.len(), m, |i| {
                        rank_scene(&data[i], &[], &OracleScorer::new(gt[i].1.clone()), 5).unwrap()
                    })
                })
            },
        );
    }
    g.finish();
}

criterion_group!(benches, synth, gt_gen, ranking);
criterion_main!(benches);
