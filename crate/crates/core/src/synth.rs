//! Synthetic stance corpus with planted relatedness and agreement signal.
//!
//! Produces files in the same formats as the real dataset, so everything
//! downstream of the loaders runs unchanged. Topics own pseudo-words and
//! entity names; articles mix a restatement of the claim, a stance sentence
//! and filler. The stance sentence sometimes merges with the restatement,
//! so a single key sentence carries part of the signal and more sentences
//! carry more of it.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{
    is_stopword, load_bodies_from_reader, load_stances_from_reader, ArticleStore, DatasetSplit, SplitName, StanceLabel,
};
use crate::embeddings::{read_text, EmbeddingStore};
use crate::error::{Error, Result};

const AGREE_MARKERS: [&str; 6] = [
    "confirmed",
    "verified",
    "genuine",
    "proven",
    "authentic",
    "corroborated",
];
const DISAGREE_MARKERS: [&str; 6] = ["denied", "hoax", "debunked", "fabricated", "refuted", "fake"];
const DISCUSS_MARKERS: [&str; 6] = [
    "reportedly",
    "allegedly",
    "rumored",
    "unverified",
    "purportedly",
    "speculated",
];

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ten", "ru", "vas", "pel", "dor", "qui", "zan", "fo", "bri", "sul", "nek", "tha", "gim",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub topics: usize,
    pub questions_per_topic: usize,
    pub articles_per_topic: usize,
    /// Articles from other topics added to each question's pool.
    pub unrelated_per_question: usize,
    pub words_per_topic: usize,
    pub generic_words: usize,
    pub dim: usize,
    /// Share of topics held out for the test split.
    pub test_fraction: f64,
    /// Probability that the stance marker sits in the claim restatement.
    pub merged_stance: f64,
    /// Probability that an article also mentions another topic, which
    /// keeps relatedness from being trivially separable.
    pub stray_mention: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            topics: 30,
            questions_per_topic: 3,
            articles_per_topic: 8,
            unrelated_per_question: 10,
            words_per_topic: 8,
            generic_words: 120,
            dim: 32,
            test_fraction: 0.3,
            merged_stance: 0.4,
            stray_mention: 0.4,
            seed: 7,
        }
    }
}

/// Generated file contents.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub bodies_csv: String,
    pub train_stances_csv: String,
    pub test_stances_csv: String,
    pub embeddings_txt: String,
}

#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub bodies: PathBuf,
    pub stances_train: PathBuf,
    pub stances_test: PathBuf,
    pub embeddings: PathBuf,
}

/// Parsed splits over one shared article store.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub articles: Arc<ArticleStore>,
    pub train: DatasetSplit,
    pub test: DatasetSplit,
    pub embeddings: Arc<EmbeddingStore>,
}

struct Topic {
    entity: [String; 2],
    words: Vec<String>,
    articles: Vec<(u32, StanceLabel)>,
}

struct Vocab {
    rng: ChaCha8Rng,
    used: HashSet<String>,
    rows: Vec<(String, Vec<f64>)>,
    dim: usize,
}

impl Vocab {
    fn direction(&mut self) -> Vec<f64> {
        let v: Vec<f64> = (0..self.dim).map(|_| self.rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect()
    }

    fn fresh_word(&mut self) -> String {
        loop {
            let n = self.rng.gen_range(2..=3);
            let w: String = (0..n).map(|_| *SYLLABLES.choose(&mut self.rng).unwrap()).collect();
            if !is_stopword(&w) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    /// Adds `word` near `centroid` with isotropic noise of size `spread`.
    fn add(&mut self, word: String, centroid: &[f64], spread: f64) {
        let noise = self.direction();
        let v = centroid.iter().zip(&noise).map(|(c, n)| c + spread * n).collect();
        self.used.insert(word.clone());
        self.rows.push((word, v));
    }

    fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows.len(), self.dim);
        for (w, v) in &self.rows {
            out.push_str(w);
            for x in v {
                out.push_str(&format!(" {x:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn markers(label: StanceLabel) -> &'static [&'static str; 6] {
    match label {
        StanceLabel::Agree => &AGREE_MARKERS,
        StanceLabel::Disagree => &DISAGREE_MARKERS,
        _ => &DISCUSS_MARKERS,
    }
}

fn sentence(words: Vec<String>) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        s = format!("{}{}", first.to_uppercase(), &s[1..]);
    }
    s.push('.');
    s
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv write: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

impl SynthCorpus {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        if cfg.topics < 2 || cfg.articles_per_topic == 0 || cfg.questions_per_topic == 0 || cfg.dim == 0 {
            return Err(Error::invalid("synthetic corpus needs two topics and nonempty sizes"));
        }
        if !(0.0..1.0).contains(&cfg.test_fraction) {
            return Err(Error::invalid("test fraction must lie in [0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut vocab = Vocab {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed),
            used: HashSet::new(),
            rows: Vec::new(),
            dim: cfg.dim,
        };

        for list in [AGREE_MARKERS, DISAGREE_MARKERS, DISCUSS_MARKERS] {
            let c = vocab.direction();
            for w in list {
                vocab.add(w.to_string(), &c, 0.3);
            }
        }
        let generic: Vec<String> = (0..cfg.generic_words)
            .map(|_| {
                let w = vocab.fresh_word();
                let c = vocab.direction();
                vocab.add(w.clone(), &c, 0.0);
                w
            })
            .collect();

        let mut topics = Vec::with_capacity(cfg.topics);
        let mut next_id = 0u32;
        for _ in 0..cfg.topics {
            let c = vocab.direction();
            let words: Vec<String> = (0..cfg.words_per_topic)
                .map(|_| {
                    let w = vocab.fresh_word();
                    vocab.add(w.clone(), &c, 0.5);
                    w
                })
                .collect();
            let entity = [vocab.fresh_word(), vocab.fresh_word()];
            for e in &entity {
                vocab.add(e.clone(), &c, 0.5);
            }
            let articles = (0..cfg.articles_per_topic)
                .map(|_| {
                    let u: f64 = rng.gen();
                    let label = if u < 0.35 {
                        StanceLabel::Agree
                    } else if u < 0.6 {
                        StanceLabel::Disagree
                    } else {
                        StanceLabel::Discuss
                    };
                    next_id += 1;
                    (next_id, label)
                })
                .collect();
            topics.push(Topic {
                entity,
                words,
                articles,
            });
        }

        let mut bodies = Vec::new();
        for (ti, t) in topics.iter().enumerate() {
            for &(id, label) in &t.articles {
                let stray = rng.gen_bool(cfg.stray_mention).then(|| {
                    let other = (ti + rng.gen_range(1..cfg.topics)) % cfg.topics;
                    &topics[other]
                });
                bodies.push(vec![
                    id.to_string(),
                    article_text(&mut rng, t, label, stray, &generic, cfg),
                ]);
            }
        }

        let mut order: Vec<usize> = (0..cfg.topics).collect();
        order.shuffle(&mut rng);
        let n_test = ((cfg.topics as f64 * cfg.test_fraction).round() as usize).clamp(1, cfg.topics - 1);
        let test_topics: BTreeSet<usize> = order[..n_test].iter().copied().collect();
        let mut train_rows = Vec::new();
        let mut test_rows = Vec::new();
        for (ti, t) in topics.iter().enumerate() {
            let in_test = test_topics.contains(&ti);
            let others: Vec<u32> = topics
                .iter()
                .enumerate()
                .filter(|(oi, _)| *oi != ti && test_topics.contains(oi) == in_test)
                .flat_map(|(_, o)| o.articles.iter().map(|a| a.0))
                .collect();
            let mut seen = HashSet::new();
            for _ in 0..cfg.questions_per_topic {
                let headline = loop {
                    let h = headline(&mut rng, t, &generic);
                    if seen.insert(h.clone()) {
                        break h;
                    }
                };
                let rows = if in_test { &mut test_rows } else { &mut train_rows };
                for &(id, label) in &t.articles {
                    rows.push(vec![headline.clone(), id.to_string(), label.as_str().to_string()]);
                }
                for &id in others.choose_multiple(&mut rng, cfg.unrelated_per_question) {
                    rows.push(vec![headline.clone(), id.to_string(), "unrelated".to_string()]);
                }
            }
        }

        Ok(SynthCorpus {
            bodies_csv: csv_text(&["Body ID", "articleBody"], &bodies)?,
            train_stances_csv: csv_text(&["Headline", "Body ID", "Stance"], &train_rows)?,
            test_stances_csv: csv_text(&["Headline", "Body ID", "Stance"], &test_rows)?,
            embeddings_txt: vocab.to_text(),
        })
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<SynthPaths> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = SynthPaths {
            bodies: dir.join("bodies.csv"),
            stances_train: dir.join("stances_train.csv"),
            stances_test: dir.join("stances_test.csv"),
            embeddings: dir.join("vectors.txt"),
        };
        for (p, text) in [
            (&paths.bodies, &self.bodies_csv),
            (&paths.stances_train, &self.train_stances_csv),
            (&paths.stances_test, &self.test_stances_csv),
            (&paths.embeddings, &self.embeddings_txt),
        ] {
            std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
        }
        Ok(paths)
    }

    /// Parses the generated text through the regular loaders.
    pub fn load(&self) -> Result<SynthData> {
        let store = load_bodies_from_reader(self.bodies_csv.as_bytes(), "synthetic bodies")?;
        let train = load_stances_from_reader(self.train_stances_csv.as_bytes(), "synthetic train", &store)?;
        let test = load_stances_from_reader(self.test_stances_csv.as_bytes(), "synthetic test", &store)?;
        let embeddings = read_text(self.embeddings_txt.as_bytes(), "synthetic vectors", None)?;
        Ok(SynthData {
            train: DatasetSplit::from_pairs(SplitName::Train, train, &store),
            test: DatasetSplit::from_pairs(SplitName::Test, test, &store),
            articles: Arc::new(store),
            embeddings: Arc::new(embeddings),
        })
    }
}

fn pick(rng: &mut ChaCha8Rng, words: &[String], n: usize) -> Vec<String> {
    words.choose_multiple(rng, n).cloned().collect()
}

fn headline(rng: &mut ChaCha8Rng, t: &Topic, generic: &[String]) -> String {
    let mut words = vec![capitalize(&t.entity[0]), capitalize(&t.entity[1])];
    words.extend(pick(rng, &t.words, 3));
    words.extend(pick(rng, generic, 1));
    words.join(" ")
}

fn article_text(
    rng: &mut ChaCha8Rng,
    t: &Topic,
    label: StanceLabel,
    stray: Option<&Topic>,
    generic: &[String],
    cfg: &SynthConfig,
) -> String {
    let marker = markers(label);
    let mut restate = pick(rng, generic, 1);
    restate.push(capitalize(&t.entity[0]));
    if rng.gen_bool(0.5) {
        restate.push(capitalize(&t.entity[1]));
    }
    let n = rng.gen_range(1..=3);
    restate.extend(pick(rng, &t.words, n));
    restate.extend(pick(rng, generic, 2));

    let mut sentences = Vec::new();
    if rng.gen_bool(cfg.merged_stance) {
        restate.push(marker.choose(rng).unwrap().to_string());
        sentences.push(sentence(restate));
    } else {
        sentences.push(sentence(restate));
        let mut stance = pick(rng, generic, 2);
        stance.extend(pick(rng, &t.words, 1));
        stance.extend(marker.choose_multiple(rng, 2).map(|m| m.to_string()));
        stance.shuffle(rng);
        sentences.push(sentence(stance));
    }
    if let Some(o) = stray {
        let mut mention = pick(rng, generic, 3);
        mention.push(capitalize(&o.entity[0]));
        mention.extend(pick(rng, &o.words, 2));
        sentences.push(sentence(mention));
    }
    for _ in 0..rng.gen_range(2..=5) {
        let len = rng.gen_range(4..=8);
        sentences.push(sentence(pick(rng, generic, len)));
    }
    // the restatement stays first, like a lead paragraph
    sentences[1..].shuffle(rng);
    sentences.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_are_content_words() {
        for w in AGREE_MARKERS.iter().chain(&DISAGREE_MARKERS).chain(&DISCUSS_MARKERS) {
            assert!(!is_stopword(w), "{w}");
        }
    }

    #[test]
    fn splits_are_topic_disjoint_and_deterministic() {
        let cfg = SynthConfig {
            topics: 6,
            ..SynthConfig::default()
        };
        let a = SynthCorpus::generate(&cfg).unwrap();
        let b = SynthCorpus::generate(&cfg).unwrap();
        assert_eq!(a.bodies_csv, b.bodies_csv);
        assert_eq!(a.test_stances_csv, b.test_stances_csv);
        let data = a.load().unwrap();
        let train_ids: HashSet<u32> = data.train.pairs.iter().map(|p| p.article_id).collect();
        assert!(data.test.pairs.iter().all(|p| !train_ids.contains(&p.article_id)));
        assert_eq!(data.embeddings.dim(), cfg.dim);
        let dist = data.train.label_distribution();
        assert!(dist.share(StanceLabel::Unrelated) > 0.0);
        assert!(dist.share(StanceLabel::Agree) > 0.0);
    }

    #[test]
    fn every_article_token_has_a_vector() {
        let data = SynthCorpus::generate(&SynthConfig::default()).unwrap().load().unwrap();
        for a in data.articles.iter() {
            for t in &a.tokens {
                assert!(data.embeddings.lookup(t).is_some(), "{t}");
            }
        }
    }
}
