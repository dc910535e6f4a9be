use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use escalation_bench::scripted_game;
use escalation_core::engine::{accident_roll, AccidentConfig};
use escalation_core::forces::{apply_attrition, AttritionConfig};
use escalation_core::protocol::MiscalculationRisk;
use escalation_core::{ForceState, Ladder, Transcript};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn games(c: &mut Criterion) {
    let mut group = c.benchmark_group("game");
    group.bench_function("random_vs_random_40_turns", |b| {
        b.iter(|| scripted_game("random:1", "random:2", "v7_alliance", black_box(3)))
    });
    group.bench_function("standoff_12_turns", |b| {
        b.iter(|| scripted_game("constant:50", "mirror", "v10_standoff_crisis", black_box(1)))
    });
    group.finish();
}

fn mechanics(c: &mut Criterion) {
    let ladder = Ladder::canonical();
    let cfg = AccidentConfig::default();
    c.bench_function("accident_roll", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        b.iter(|| accident_roll(&ladder, black_box(450), MiscalculationRisk::High, &cfg, &mut rng))
    });
    let attrition = AttritionConfig::default();
    let (a, f) = (ForceState::alpha(), ForceState::beta());
    c.bench_function("apply_attrition", |b| {
        b.iter(|| apply_attrition(&a, &f, black_box(725), black_box(450), &attrition))
    });
}

fn transcripts(c: &mut Criterion) {
    let t = scripted_game("random:1", "deceiver:70:175", "v7_alliance", 5);
    let text = t.to_jsonl();
    c.bench_function("transcript_serialize", |b| b.iter(|| black_box(&t).to_jsonl()));
    c.bench_function("transcript_parse", |b| {
        b.iter(|| Transcript::parse(black_box(&text)).unwrap())
    });
    c.bench_function("transcript_replay", |b| {
        b.iter_batched(|| t.clone(), |t| t.replay().unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, games, mechanics, transcripts);
criterion_main!(benches);
