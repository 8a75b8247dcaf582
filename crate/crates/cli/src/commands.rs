use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use agreesearch_core::corpus::{load_bodies, DatasetSplit, SplitName};
use agreesearch_core::embeddings::{load_embeddings, EmbeddingFormat, EmbeddingStore};
use agreesearch_core::eval::{find_controversial, render_tables, run_experiment, EvalReport, SweepConfig};
use agreesearch_core::pipeline::{Engine, ListSizes, Models, QueryResult, MODEL_FILES};
use agreesearch_core::synth::{SynthConfig, SynthCorpus};
use agreesearch_core::training::{train_models, vocabulary, TrainConfig};
use anyhow::Context;

use crate::config::{require_file, RunConfig, UsageError};

fn train_config(c: &RunConfig) -> TrainConfig {
    let mut t = TrainConfig::default().with_seed(c.seed);
    t.features.svd_rank = c.svd_rank;
    t.gbdt.num_rounds = c.gbdt_rounds;
    t.stance.key_sentences = c.k;
    t.stance.epochs = c.epochs;
    t.stance.hidden_dim = c.hidden_dim;
    t.stance.batch_size = c.batch_size;
    t.stance.learning_rate = c.learning_rate;
    t
}

fn load_split(
    name: SplitName,
    bodies_flag: &str,
    bodies: Option<&Path>,
    stances_flag: &str,
    stances: Option<&Path>,
) -> anyhow::Result<DatasetSplit> {
    let bodies = require_file(bodies_flag, bodies)?;
    let stances = require_file(stances_flag, stances)?;
    let split = DatasetSplit::load(name, bodies, stances)
        .with_context(|| format!("loading {} and {}", bodies.display(), stances.display()))?;
    if split.pairs.is_empty() {
        return Err(UsageError(format!("--{stances_flag}: no pairs in {}", stances.display())).into());
    }
    Ok(split)
}

fn test_bodies_flag(c: &RunConfig) -> &'static str {
    if c.bodies_test.is_some() {
        "bodies-test"
    } else {
        "bodies"
    }
}

fn load_vectors(path: &Path, keep: &HashSet<String>) -> anyhow::Result<Arc<EmbeddingStore>> {
    log::info!("reading vectors from {}", path.display());
    let store = load_embeddings(path, EmbeddingFormat::from_path(path), Some(keep))?;
    if store.is_empty() {
        return Err(UsageError(format!(
            "--embeddings: no vectors for the corpus vocabulary in {}",
            path.display()
        ))
        .into());
    }
    log::info!("kept {} of {} vocabulary words", store.len(), keep.len());
    Ok(Arc::new(store))
}

fn require_models(c: &RunConfig) -> anyhow::Result<()> {
    for name in MODEL_FILES {
        let p = c.model_dir.join(name);
        if !p.exists() {
            return Err(UsageError(format!(
                "--model-dir: {} is missing {name}; run train first",
                c.model_dir.display()
            ))
            .into());
        }
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn train(c: &RunConfig) -> anyhow::Result<()> {
    let train = load_split(
        SplitName::Train,
        "bodies",
        c.bodies.as_deref(),
        "stances-train",
        c.stances_train.as_deref(),
    )?;
    let embeddings_path = require_file("embeddings", c.embeddings.as_deref())?;
    // test vocabulary rides along so the stored vector subset covers eval
    let test = match &c.stances_test {
        Some(_) => Some(load_split(
            SplitName::Test,
            test_bodies_flag(c),
            c.bodies_for_test(),
            "stances-test",
            c.stances_test.as_deref(),
        )?),
        None => None,
    };
    let keep = vocabulary(std::iter::once(&train).chain(test.as_ref()));
    let embeddings = load_vectors(embeddings_path, &keep)?;
    let (models, summary) = train_models(&train, embeddings, &train_config(c))?;
    models.save(&c.model_dir)?;
    let summary_json = serde_json::to_string_pretty(&summary)?;
    write_file(&c.model_dir.join("train_summary.json"), &summary_json)?;
    println!("pairs: {} ({} related)", summary.pairs, summary.related_pairs);
    println!(
        "relatedness log-loss: {:.4} -> {:.4} over {} rounds ({:.1}s)",
        summary.gbdt_losses.first().copied().unwrap_or(f64::NAN),
        summary.gbdt_losses.last().copied().unwrap_or(f64::NAN),
        summary.gbdt_losses.len(),
        summary.relatedness_seconds
    );
    let losses: Vec<String> = summary.stance_losses.iter().map(|l| format!("{l:.4}")).collect();
    println!(
        "agreement loss per epoch: {} ({:.1}s)",
        losses.join(" "),
        summary.stance_seconds
    );
    for (family, share) in &summary.family_importance {
        println!("importance {:<9} {:>6.2}%", family.as_str(), 100.0 * share);
    }
    println!("models written to {}", c.model_dir.display());
    Ok(())
}

pub fn eval(c: &RunConfig) -> anyhow::Result<()> {
    require_models(c)?;
    let test = load_split(
        SplitName::Test,
        test_bodies_flag(c),
        c.bodies_for_test(),
        "stances-test",
        c.stances_test.as_deref(),
    )?;
    let embeddings = match &c.embeddings {
        Some(p) => Some(load_vectors(
            require_file("embeddings", Some(p))?,
            &vocabulary([&test]),
        )?),
        None => None,
    };
    let models = Models::load(&c.model_dir, embeddings)?;
    let engine = Engine::new(Arc::new(models), test.articles.clone())?;
    let report = EvalReport::evaluate("test", &engine, &test)?;
    let dir = c.report_dir();
    write_file(&dir.join("report.jsonl"), &(report.to_json_line() + "\n"))?;
    let tables = render_tables(std::slice::from_ref(&report));
    write_file(&dir.join("report.txt"), &tables)?;
    println!("questions: {}", report.all.questions);
    println!("controversial questions: {}", find_controversial(&test).len());
    print!("{tables}");
    println!("reports written to {}", dir.display());
    Ok(())
}

pub fn sweep(c: &RunConfig) -> anyhow::Result<()> {
    let train = load_split(
        SplitName::Train,
        "bodies",
        c.bodies.as_deref(),
        "stances-train",
        c.stances_train.as_deref(),
    )?;
    let test = load_split(
        SplitName::Test,
        test_bodies_flag(c),
        c.bodies_for_test(),
        "stances-test",
        c.stances_test.as_deref(),
    )?;
    let embeddings_path = require_file("embeddings", c.embeddings.as_deref())?;
    let embeddings = load_vectors(embeddings_path, &vocabulary([&train, &test]))?;
    let sweep = SweepConfig {
        ks: c.sweep_k.clone(),
        epochs: c.sweep_epochs.clone().unwrap_or_else(|| vec![c.epochs]),
        seeds: c.seeds.clone().unwrap_or_else(|| vec![c.seed]),
    };
    let points = run_experiment(&train, &test, embeddings, &train_config(c), &sweep)?;
    let dir = c.report_dir();
    let mut jsonl = String::new();
    for p in &points {
        jsonl.push_str(&serde_json::to_string(p)?);
        jsonl.push('\n');
    }
    write_file(&dir.join("sweep.jsonl"), &jsonl)?;
    let reports: Vec<EvalReport> = points
        .iter()
        .flat_map(|p| {
            p.per_seed
                .iter()
                .map(|(_, r)| r.clone())
                .chain(std::iter::once(p.mean.clone()))
        })
        .collect();
    let tables = render_tables(&reports);
    write_file(&dir.join("sweep.txt"), &tables)?;
    print!("{tables}");
    println!("{} sweep reports written to {}", points.len(), dir.display());
    Ok(())
}

/// Three sections with their key-sentence snippets.
pub fn render_result(result: &QueryResult) -> String {
    let mut out = String::new();
    for (label, items) in result.lists() {
        let _ = writeln!(out, "{label} ({})", items.len());
        if items.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        for (rank, it) in items.iter().enumerate() {
            let score = match it.verdict.beta {
                Some(b) if label != agreesearch_core::corpus::StanceLabel::Discuss => format!("beta={b:+.3}"),
                _ => format!("rel={:.3}", it.verdict.rel),
            };
            let _ = writeln!(
                out,
                "  {}. [{}] p={:.3} {score} {}",
                rank + 1,
                it.article_id,
                it.verdict.p,
                it.title
            );
            for s in &it.key_sentences {
                let _ = writeln!(out, "       ({:.3}) {}", s.similarity, s.text);
            }
        }
    }
    out
}

pub fn query(c: &RunConfig, question: &str) -> anyhow::Result<()> {
    if question.trim().is_empty() {
        return Err(UsageError("question must not be empty".into()).into());
    }
    require_models(c)?;
    let bodies = require_file("bodies", c.bodies.as_deref())?;
    let store = load_bodies(bodies)?;
    if store.is_empty() {
        return Err(UsageError(format!("--bodies: no articles in {}", bodies.display())).into());
    }
    let models = Models::load(&c.model_dir, None)?;
    let engine = Engine::new(Arc::new(models), Arc::new(store))?;
    let result = engine.query(question, None, ListSizes::default(), c.pool_size)?;
    print!("{}", render_result(&result));
    Ok(())
}

pub fn serve(c: &RunConfig) -> anyhow::Result<()> {
    require_models(c)?;
    let bodies = require_file("bodies", c.bodies.as_deref())?.to_path_buf();
    let cors = agreesearch_service::cors(c.cors_origin.as_deref()).map_err(UsageError)?;
    let model_dir = c.model_dir.clone();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let addr = std::net::SocketAddr::from(([0, 0, 0, 0], c.port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding port {}", c.port))?;
        let state = agreesearch_service::AppState::loading().with_pool_size(c.pool_size);
        let loader = state.clone();
        tokio::task::spawn_blocking(move || {
            let loaded = (|| -> anyhow::Result<()> {
                let hashes = agreesearch_service::hash_model_dir(&model_dir)?;
                let store = load_bodies(&bodies)?;
                let models = Models::load(&model_dir, None)?;
                loader.install(Engine::new(Arc::new(models), Arc::new(store))?, hashes);
                Ok(())
            })();
            match loaded {
                Ok(()) => log::info!("models loaded"),
                Err(e) => {
                    eprintln!("error: loading models: {e:#}");
                    std::process::exit(1);
                }
            }
        });
        log::info!("listening on {addr}");
        agreesearch_service::serve(listener, state, cors).await?;
        Ok(())
    })
}

pub fn synth(c: &RunConfig, dir: &Path) -> anyhow::Result<()> {
    let corpus = SynthCorpus::generate(&SynthConfig {
        seed: c.seed,
        topics: 60,
        questions_per_topic: 2,
        ..SynthConfig::default()
    })?;
    let paths = corpus.write(dir)?;
    let abs = |p: &PathBuf| std::fs::canonicalize(p).unwrap_or_else(|_| p.clone());
    let conf = format!(
        "# synthetic corpus; small model settings suit its size\n\
         bodies = {}\nstances-train = {}\nstances-test = {}\nembeddings = {}\nmodel-dir = {}\n\
         svd-rank = 20\nhidden-dim = 16\ngbdt-rounds = 15\nepochs = 15\nbatch-size = 8\nlearning-rate = 0.003\n",
        abs(&paths.bodies).display(),
        abs(&paths.stances_train).display(),
        abs(&paths.stances_test).display(),
        abs(&paths.embeddings).display(),
        abs(&dir.to_path_buf()).join("models").display(),
    );
    let conf_path = dir.join("agreesearch.conf");
    write_file(&conf_path, &conf)?;
    println!("synthetic corpus written to {}", dir.display());
    println!("config: {}", conf_path.display());
    Ok(())
}
