use criterion::{criterion_group, criterion_main, Criterion};
use escalation_bench::corpus;
use escalation_core::analytics::{AnalyticsReport, Metric, ReportFormat};

fn analytics(c: &mut Criterion) {
    let corpus = corpus(50);
    c.bench_function("analytics_compute_50_games", |b| {
        b.iter(|| AnalyticsReport::compute(&corpus).unwrap())
    });
    let report = AnalyticsReport::compute(&corpus).unwrap();
    c.bench_function("analytics_render_markdown", |b| {
        b.iter(|| report.render(&Metric::ALL, true, ReportFormat::Markdown))
    });
}

criterion_group!(benches, analytics);
criterion_main!(benches);
