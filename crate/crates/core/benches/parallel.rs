use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lad_core::description::{render, RenderConfig};
use lad_core::encoder::{EncoderParams, Vocabulary};
use lad_core::par::{self, Execution};
use lad_core::scene::{sample_normal, CaptureCondition, ScenarioId};
use lad_core::scorer::{build_library, score_split};
use lad_core::seed;
use lad_core::trainer::{fit, TokenPair, TrainConfig};

fn texts(n: usize) -> Vec<String> {
    let spec = ScenarioId::Stationery.spec();
    let cfg = RenderConfig::for_condition(CaptureCondition::BlurryCD);
    let mut rng = seed::rng(1);
    (0..n).map(|_| render(&sample_normal(spec, &mut rng), &cfg, &mut rng).unwrap().text).collect()
}

fn scoring(c: &mut Criterion) {
    let train = texts(400);
    let test = texts(400);
    let vocab = Vocabulary::build(train.iter().chain(&test).map(String::as_str));
    let params = EncoderParams::init(vocab.len(), 64, 0.1, 0).unwrap();
    let pairs: Vec<(String, String)> = train.iter().enumerate().map(|(i, t)| (i.to_string(), t.clone())).collect();
    let lib = build_library(&pairs, &params, &vocab, Execution::Sequential).unwrap();

    let mut g = c.benchmark_group("score_split");
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| score_split(&test, &params, &vocab, &lib, 5, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("build_library");
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| build_library(&pairs, &params, &vocab, exec).unwrap())
        });
    }
    g.finish();
}

// one short training run per task, the unit of work the pipeline parallelizes over
fn training(c: &mut Criterion) {
    let train = texts(64);
    let vocab = Vocabulary::build(train.iter().map(String::as_str));
    let pairs: Vec<TokenPair> = train.windows(2).map(|w| TokenPair::new(&w[0], &w[1], &vocab).unwrap()).collect();
    let cfg = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let init = EncoderParams::init(vocab.len(), 32, 0.1, 0).unwrap();
    let tasks: Vec<u64> = (0..8).collect();

    let mut g = c.benchmark_group("train_tasks");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| par::map(exec, &tasks, |&s| fit(&pairs, init.clone(), &TrainConfig { seed: s, ..cfg }).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, scoring, training);
criterion_main!(benches);
