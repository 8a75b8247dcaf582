//! Throughput of the data-parallel stages.
//!
//! `cargo bench -p agreesearch-core` measures the rayon build and, inside it,
//! the same work pinned to one thread. `cargo bench -p agreesearch-core
//! --no-default-features` measures the plain sequential build. Bench ids
//! carry the mode, so the three runs compare side by side in the report.

use std::sync::Arc;

use agreesearch_core::corpus::Question;
use agreesearch_core::gbdt::{train_gbdt, FeatureTable, GbdtParams};
use agreesearch_core::pipeline::{Engine, Models};
use agreesearch_core::stancenet::{train_stance, MatchLstmModel};
use agreesearch_core::synth::{SynthConfig, SynthCorpus, SynthData};
use agreesearch_core::training::{fit_relatedness, stance_examples, TrainConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus() -> SynthData {
    SynthCorpus::generate(&SynthConfig {
        topics: 40,
        ..SynthConfig::default()
    })
    .and_then(|c| c.load())
    .expect("synthetic corpus")
}

fn gbdt_table(rows: usize, cols: usize) -> (FeatureTable, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.0..1.0)).collect();
    let labels = (0..rows)
        .map(|r| {
            let s: f64 = values[r * cols..r * cols + 3].iter().sum();
            (s + rng.gen_range(-0.3..0.3) > 1.5) as u8 as f64
        })
        .collect();
    (FeatureTable::new(rows, cols, values).expect("table"), labels)
}

/// Runs `f` as built, and pinned to one thread when rayon is on.
fn modes(c: &mut Criterion, group: &str, mut f: impl FnMut() + Send) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    let built = if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    };
    g.bench_function(BenchmarkId::from_parameter(built), |b| b.iter(&mut f));
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
        g.bench_function(BenchmarkId::from_parameter("parallel-1-thread"), |b| {
            b.iter(|| pool.install(&mut f))
        });
    }
    g.finish();
}

fn benches(c: &mut Criterion) {
    let data = corpus();
    let config = {
        let mut t = TrainConfig::default();
        t.features.svd_rank = 20;
        t.gbdt.num_rounds = 20;
        t.stance.hidden_dim = 16;
        t.stance.epochs = 1;
        t.stance.batch_size = 8;
        t.stance.embedding_dim = data.embeddings.dim();
        t
    };

    let (table, labels) = gbdt_table(4000, 12);
    let params = GbdtParams {
        num_rounds: 20,
        ..GbdtParams::default()
    };
    modes(c, "gbdt_train_4000x12", || {
        train_gbdt(&table, &labels, &params).expect("gbdt");
    });

    modes(c, "relatedness_fit", || {
        fit_relatedness(&data.train, data.embeddings.clone(), &config.features, &config.gbdt).expect("fit");
    });

    let examples = stance_examples(&data.train, &data.embeddings, &config.stance).expect("examples");
    modes(c, "agreement_epoch", || {
        train_stance(&examples, &data.embeddings, &config.stance).expect("train");
    });

    let (features, gbdt, _) =
        fit_relatedness(&data.train, data.embeddings.clone(), &config.features, &config.gbdt).expect("fit");
    let stance = MatchLstmModel::init(&config.stance, 1).expect("init");
    let models = Arc::new(Models::new(features, gbdt, stance).expect("models"));
    let engine = Engine::new(models, data.articles.clone()).expect("engine");
    let pools: Vec<(String, Vec<u32>)> = data
        .test
        .pools()
        .into_iter()
        .map(|(q, pool)| (q.text.clone(), pool.iter().map(|p| p.article_id).collect()))
        .collect();
    modes(c, "classify_test_pools", || {
        for (q, ids) in &pools {
            let prepared = engine.prepare_question(Question::new(q.as_str()));
            engine.classify_pool(&prepared, ids).expect("classify");
        }
    });
}

criterion_group!(throughput, benches);
criterion_main!(throughput);
