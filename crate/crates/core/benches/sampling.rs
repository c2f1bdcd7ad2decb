use std::fs;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use morphbpe::align::{self, EvalConfig};
use morphbpe::gold::{GoldFormat, GoldLexicon};
use morphbpe::sampling::sample_distribution_with;
use morphbpe::{Exec, TokenizerModel, TrainerConfig};

fn setup() -> (TokenizerModel, GoldLexicon) {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/en");
    let text = fs::read_to_string(fixtures.join("corpus.txt")).unwrap();
    let model = TrainerConfig::new(3000).train(text.lines()).unwrap();
    let (lexicon, _) = GoldLexicon::load(&fixtures.join("gold.tsv"), GoldFormat::Canonical, "en").unwrap();
    let (small, _) = lexicon.intersect_vocabulary(text.lines().take(100).flat_map(str::split_whitespace));
    (model, small)
}

fn execs() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn benches(c: &mut Criterion) {
    let (model, lexicon) = setup();

    let mut group = c.benchmark_group("sample_distribution");
    for (name, exec) in execs() {
        group.bench_function(BenchmarkId::new(name, "unhappinesses/N=20000"), |b| {
            b.iter(|| sample_distribution_with(exec, &model, "unhappinesses", 0.1, 20_000, 7).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("evaluate_language");
    group.sample_size(10);
    for (name, exec) in execs() {
        let cfg = EvalConfig {
            samples: 500,
            exec,
            ..EvalConfig::default()
        };
        group.bench_function(BenchmarkId::new(name, format!("{}words/N=500", lexicon.len())), |b| {
            b.iter(|| align::evaluate_language(&model, &lexicon, &cfg, "en", None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(sampling, benches);
criterion_main!(sampling);
