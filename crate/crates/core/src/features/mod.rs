//! Keyword, entity, word-vector and latent-topic features for a
//! (question, article) pair.

mod svd;
mod tfidf;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use svd::{svd_project, truncated_svd, CsrMatrix, SvdModel, OVERSAMPLING, POWER_ITERATIONS};
pub use tfidf::{fit_tfidf, IdfTable, SparseVec, TfIdfModel};

use crate::container::{ByteReader, ByteWriter, Container};
use crate::corpus::{is_stopword, Article, Question};
use crate::embeddings::{average_embedding, cosine, EmbeddingStore};
use crate::error::{Error, Result};
use crate::gbdt::MISSING;

/// Raw overlap and its value normalized by the question's self-overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overlap {
    pub raw: f64,
    pub normalized: f64,
}

pub type TermCounts = HashMap<String, u32>;

fn count_terms<S: AsRef<str>>(terms: impl IntoIterator<Item = S>) -> TermCounts {
    let mut counts = TermCounts::new();
    for t in terms {
        *counts.entry(t.as_ref().to_string()).or_default() += 1;
    }
    counts
}

fn keyword_counts<S: AsRef<str>>(tokens: &[S]) -> TermCounts {
    count_terms(tokens.iter().map(AsRef::as_ref).filter(|t| !is_stopword(t)))
}

/// `Σ_{w∈q} min(freq(w,q), freq(w,d)) · weight(w)`, normalized by the same
/// sum with `d = q`. Zero when the question side is empty.
pub fn overlap_counts(q: &TermCounts, d: &TermCounts, weight: impl Fn(&str) -> f64) -> Overlap {
    let mut raw = 0.0;
    let mut own = 0.0;
    // fixed summation order keeps results bit-identical across runs
    let mut terms: Vec<(&String, &u32)> = q.iter().collect();
    terms.sort_unstable_by(|a, b| a.0.cmp(b.0));
    for (w, &fq) in terms {
        let wt = weight(w);
        let fd = d.get(w).copied().unwrap_or(0);
        raw += fq.min(fd) as f64 * wt;
        own += fq as f64 * wt;
    }
    let normalized = if own > 0.0 { (raw / own).clamp(0.0, 1.0) } else { 0.0 };
    Overlap { raw, normalized }
}

/// Non-stopword keyword overlap, IDF-weighted when `idf` is given.
pub fn keyword_overlap<S: AsRef<str>>(q_tokens: &[S], d_tokens: &[S], idf: Option<&TfIdfModel>) -> Overlap {
    let (q, d) = (keyword_counts(q_tokens), keyword_counts(d_tokens));
    match idf {
        Some(m) => overlap_counts(&q, &d, |w| m.weight(w)),
        None => overlap_counts(&q, &d, |_| 1.0),
    }
}

/// Bag-of-entities overlap, IDF-weighted when `idf` is given.
pub fn entity_overlap<S: AsRef<str>>(q_entities: &[S], d_entities: &[S], idf: Option<&IdfTable>) -> Overlap {
    let (q, d) = (count_terms(q_entities), count_terms(d_entities));
    match idf {
        Some(t) => overlap_counts(&q, &d, |e| t.weight(e)),
        None => overlap_counts(&q, &d, |_| 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFamily {
    Keyword,
    Entity,
    Word2Vec,
    Svd,
    Length,
}

impl FeatureFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::Keyword => "keyword",
            FeatureFamily::Entity => "entity",
            FeatureFamily::Word2Vec => "word2vec",
            FeatureFamily::Svd => "svd",
            FeatureFamily::Length => "length",
        }
    }
}

/// Column names and families in model-input order.
pub const FEATURE_COLUMNS: [(&str, FeatureFamily); 8] = [
    ("kw_overlap_norm", FeatureFamily::Keyword),
    ("kw_overlap_idf_norm", FeatureFamily::Keyword),
    ("entity_overlap_norm", FeatureFamily::Entity),
    ("entity_overlap_idf_norm", FeatureFamily::Entity),
    ("w2v_cosine", FeatureFamily::Word2Vec),
    ("svd_cosine", FeatureFamily::Svd),
    ("log_article_tokens", FeatureFamily::Length),
    ("log_question_tokens", FeatureFamily::Length),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureVector {
    pub kw_overlap_norm: f64,
    pub kw_overlap_idf_norm: f64,
    pub entity_overlap_norm: f64,
    pub entity_overlap_idf_norm: f64,
    /// 0 when either side has no word vectors (see `w2v_missing`).
    pub w2v_cosine: f64,
    /// 0 when either side projects to the zero vector (see `svd_missing`).
    pub svd_cosine: f64,
    pub log_article_tokens: f64,
    pub log_question_tokens: f64,
    pub w2v_missing: bool,
    pub svd_missing: bool,
}

impl FeatureVector {
    /// Tree-model input. Cosines without a representation become
    /// [`MISSING`] so the trees can route them separately from a true 0.
    pub fn to_row(&self, with_length: bool) -> Vec<f64> {
        let mut row = vec![
            self.kw_overlap_norm,
            self.kw_overlap_idf_norm,
            self.entity_overlap_norm,
            self.entity_overlap_idf_norm,
            if self.w2v_missing { MISSING } else { self.w2v_cosine },
            if self.svd_missing { MISSING } else { self.svd_cosine },
        ];
        if with_length {
            row.push(self.log_article_tokens);
            row.push(self.log_question_tokens);
        }
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub svd_rank: usize,
    pub min_df: usize,
    pub w2v_skip_stopwords: bool,
    pub length_features: bool,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            svd_rank: 50,
            min_df: 2,
            w2v_skip_stopwords: true,
            length_features: true,
            seed: 42,
        }
    }
}

impl FeatureConfig {
    pub fn feature_count(&self) -> usize {
        if self.length_features {
            8
        } else {
            6
        }
    }

    pub fn families(&self) -> Vec<FeatureFamily> {
        FEATURE_COLUMNS[..self.feature_count()].iter().map(|c| c.1).collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        FEATURE_COLUMNS[..self.feature_count()].iter().map(|c| c.0).collect()
    }
}

/// Fitted models behind [`FeatureModels::features`].
#[derive(Debug, Clone)]
pub struct FeatureModels {
    pub config: FeatureConfig,
    pub tfidf: TfIdfModel,
    pub entity_idf: IdfTable,
    pub svd: SvdModel,
    pub embeddings: Arc<EmbeddingStore>,
}

/// Per-text quantities reused across every pair the text takes part in.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedText {
    pub keywords: TermCounts,
    pub entities: TermCounts,
    pub w2v: Option<Vec<f64>>,
    pub svd: Option<Vec<f64>>,
    pub token_count: usize,
}

impl FeatureModels {
    /// Fits TF-IDF on articles plus questions, entity IDF on their entity
    /// bags, and the SVD on article TF-IDF rows. The SVD rank is clamped to
    /// what the matrix supports.
    pub fn fit<'a>(
        articles: impl IntoIterator<Item = &'a Article>,
        questions: impl IntoIterator<Item = &'a Question>,
        embeddings: Arc<EmbeddingStore>,
        config: FeatureConfig,
    ) -> Result<Self> {
        let articles: Vec<&Article> = articles.into_iter().collect();
        let questions: Vec<&Question> = questions.into_iter().collect();
        let token_docs: Vec<&Vec<String>> = articles
            .iter()
            .map(|a| &a.tokens)
            .chain(questions.iter().map(|q| &q.tokens))
            .collect();
        let owned: Vec<Vec<&str>> = token_docs
            .iter()
            .map(|d| d.iter().map(String::as_str).collect())
            .collect();
        let tfidf = fit_tfidf(&owned, config.min_df)?;
        let entity_idf = IdfTable::fit(
            articles
                .iter()
                .map(|a| a.entities().to_vec())
                .chain(questions.iter().map(|q| q.entities.clone())),
            1,
        )?;

        let rows: Vec<SparseVec> = crate::par::map(&articles, |a| tfidf.transform(&a.tokens));
        let matrix = CsrMatrix::from_rows(&rows, tfidf.vocab_size())?;
        let max_rank = matrix.rows().min(matrix.cols());
        if max_rank == 0 {
            return Err(Error::invalid("no vocabulary left to fit the svd on"));
        }
        let rank = config.svd_rank.min(max_rank);
        if rank < config.svd_rank {
            log::warn!("svd rank clamped from {} to {rank}", config.svd_rank);
        }
        let svd = truncated_svd(&matrix, rank, config.seed)?;
        Ok(FeatureModels {
            config,
            tfidf,
            entity_idf,
            svd,
            embeddings,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.config.feature_count()
    }

    pub fn prepare(&self, tokens: &[String], entities: &[String]) -> PreparedText {
        let projected = svd_project(tokens, &self.tfidf, &self.svd);
        let svd = projected.iter().any(|&v| v != 0.0).then_some(projected);
        PreparedText {
            keywords: keyword_counts(tokens),
            entities: count_terms(entities),
            w2v: average_embedding(tokens, &self.embeddings, self.config.w2v_skip_stopwords),
            svd,
            token_count: tokens.len(),
        }
    }

    pub fn prepare_article(&self, article: &Article) -> PreparedText {
        self.prepare(&article.tokens, article.entities())
    }

    pub fn prepare_question(&self, question: &Question) -> PreparedText {
        self.prepare(&question.tokens, &question.entities)
    }

    pub fn features(&self, q: &PreparedText, d: &PreparedText) -> FeatureVector {
        let kw = overlap_counts(&q.keywords, &d.keywords, |_| 1.0);
        let kw_idf = overlap_counts(&q.keywords, &d.keywords, |w| self.tfidf.weight(w));
        let ent = overlap_counts(&q.entities, &d.entities, |_| 1.0);
        let ent_idf = overlap_counts(&q.entities, &d.entities, |e| self.entity_idf.weight(e));
        let cos = |a: &Option<Vec<f64>>, b: &Option<Vec<f64>>| match (a, b) {
            (Some(a), Some(b)) => Some(cosine(a, b).expect("same dimension")),
            _ => None,
        };
        let w2v = cos(&q.w2v, &d.w2v);
        let svd = cos(&q.svd, &d.svd);
        FeatureVector {
            kw_overlap_norm: kw.normalized,
            kw_overlap_idf_norm: kw_idf.normalized,
            entity_overlap_norm: ent.normalized,
            entity_overlap_idf_norm: ent_idf.normalized,
            w2v_cosine: w2v.unwrap_or(0.0),
            svd_cosine: svd.unwrap_or(0.0),
            log_article_tokens: (d.token_count as f64).ln_1p(),
            log_question_tokens: (q.token_count as f64).ln_1p(),
            w2v_missing: w2v.is_none(),
            svd_missing: svd.is_none(),
        }
    }

    pub fn row(&self, q: &PreparedText, d: &PreparedText) -> Vec<f64> {
        self.features(q, d).to_row(self.config.length_features)
    }

    pub fn to_container(&self, c: &mut Container) {
        let mut cfg = ByteWriter::new();
        cfg.u64(self.config.svd_rank as u64)
            .u64(self.config.min_df as u64)
            .u8(self.config.w2v_skip_stopwords as u8)
            .u8(self.config.length_features as u8)
            .u64(self.config.seed);
        c.push("FEAT", cfg.finish());
        let mut w = ByteWriter::new();
        self.tfidf.encode(&mut w);
        c.push("TFIDF", w.finish());
        let mut w = ByteWriter::new();
        self.entity_idf.encode(&mut w);
        c.push("ENTIDF", w.finish());
        let mut w = ByteWriter::new();
        self.svd.encode(&mut w);
        c.push("SVD", w.finish());
    }

    pub fn from_container(c: &Container, embeddings: Arc<EmbeddingStore>) -> Result<Self> {
        let mut r = ByteReader::new(c.require("FEAT")?);
        let config = FeatureConfig {
            svd_rank: r.u64()? as usize,
            min_df: r.u64()? as usize,
            w2v_skip_stopwords: r.u8()? != 0,
            length_features: r.u8()? != 0,
            seed: r.u64()?,
        };
        r.finish()?;
        let mut r = ByteReader::new(c.require("TFIDF")?);
        let tfidf = TfIdfModel::decode(&mut r)?;
        r.finish()?;
        let mut r = ByteReader::new(c.require("ENTIDF")?);
        let entity_idf = IdfTable::decode(&mut r)?;
        r.finish()?;
        let mut r = ByteReader::new(c.require("SVD")?);
        let svd = SvdModel::decode(&mut r)?;
        r.finish()?;
        if svd.cols() != tfidf.vocab_size() {
            return Err(Error::Container("svd width does not match vocabulary".into()));
        }
        Ok(FeatureModels {
            config,
            tfidf,
            entity_idf,
            svd,
            embeddings,
        })
    }
}

/// Features of one pair computed from scratch.
pub fn assemble_features(q: &Question, d: &Article, models: &FeatureModels) -> FeatureVector {
    models.features(&models.prepare_question(q), &models.prepare_article(d))
}
