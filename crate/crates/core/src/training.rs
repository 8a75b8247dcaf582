//! End-to-end fitting of the feature models, relatedness trees and
//! agreement network from one labelled split.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::corpus::DatasetSplit;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureFamily, FeatureModels, FEATURE_COLUMNS};
use crate::gbdt::{train_gbdt_logged, FeatureTable, GbdtModel, GbdtParams};
use crate::par;
use crate::pipeline::Models;
use crate::stancenet::{
    question_vector, rank_sentences, train_stance_logged, EncodedPair, MatchLstmModel, StanceConfig, TrainingExample,
};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainConfig {
    pub features: FeatureConfig,
    pub gbdt: GbdtParams,
    pub stance: StanceConfig,
}

impl TrainConfig {
    /// Uses `seed` for every randomized component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.features.seed = seed;
        self.gbdt.seed = seed;
        self.stance.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub pairs: usize,
    pub related_pairs: usize,
    pub gbdt_losses: Vec<f64>,
    pub stance_losses: Vec<f64>,
    /// Share of total split gain per feature family.
    pub family_importance: Vec<(FeatureFamily, f64)>,
    pub relatedness_seconds: f64,
    pub stance_seconds: f64,
}

/// Lowercase tokens of every article and question in `splits`, the word
/// set worth keeping from a large embedding file.
pub fn vocabulary<'a>(splits: impl IntoIterator<Item = &'a DatasetSplit>) -> HashSet<String> {
    let mut out = HashSet::new();
    for s in splits {
        for a in s.articles.iter() {
            out.extend(a.tokens.iter().map(|t| t.to_lowercase()));
        }
        for q in s.questions() {
            out.extend(q.tokens.iter().map(|t| t.to_lowercase()));
        }
    }
    out
}

/// Fits TF-IDF, entity IDF and SVD on `split`, then the trees on every pair
/// with related = 1.
pub fn fit_relatedness(
    split: &DatasetSplit,
    embeddings: Arc<EmbeddingStore>,
    features: &FeatureConfig,
    params: &GbdtParams,
) -> Result<(FeatureModels, GbdtModel, Vec<f64>)> {
    if split.pairs.is_empty() {
        return Err(Error::invalid("training split has no pairs"));
    }
    let questions = split.questions();
    let models = FeatureModels::fit(
        split.articles.iter(),
        questions.iter().map(|q| q.as_ref()),
        embeddings,
        features.clone(),
    )?;
    let articles: Vec<_> = split.articles.iter().collect();
    let prepared_articles: HashMap<_, _> = articles
        .iter()
        .map(|a| a.id)
        .zip(par::map(&articles, |a| models.prepare_article(a)))
        .collect();
    let prepared_questions: HashMap<&str, _> = questions
        .iter()
        .map(|q| q.text.as_str())
        .zip(par::map(&questions, |q| models.prepare_question(q)))
        .collect();
    let rows = par::map(&split.pairs, |p| {
        models.row(
            &prepared_questions[p.question.text.as_str()],
            &prepared_articles[&p.article_id],
        )
    });
    let labels: Vec<f64> = split.pairs.iter().map(|p| p.label.is_related() as u8 as f64).collect();
    let table = FeatureTable::from_rows(&rows)?;
    let (gbdt, losses) = train_gbdt_logged(&table, &labels, params)?;
    Ok((models, gbdt, losses))
}

/// Agreement examples for the gold-related pairs of `split`, each article
/// reduced to its top `config.key_sentences` sentences.
pub fn stance_examples(
    split: &DatasetSplit,
    store: &EmbeddingStore,
    config: &StanceConfig,
) -> Result<Vec<TrainingExample>> {
    let related: Vec<_> = split.pairs.iter().filter(|p| p.label.is_related()).collect();
    let mut qvecs: HashMap<&str, Option<Vec<f64>>> = HashMap::new();
    for p in &related {
        qvecs
            .entry(p.question.text.as_str())
            .or_insert_with(|| question_vector(&p.question.tokens, store));
    }
    par::map(&related, |p| {
        let article = split
            .article(p.article_id)
            .ok_or_else(|| Error::invalid(format!("unknown article id {}", p.article_id)))?;
        let selection = rank_sentences(
            qvecs[p.question.text.as_str()].as_deref(),
            article.sentences(),
            config.key_sentences,
            store,
        )?;
        let pair = EncodedPair::encode(&p.question.tokens, &selection.token_lists(), store, config);
        Ok(TrainingExample { pair, label: p.label })
    })
    .into_iter()
    .collect()
}

pub fn fit_stance(
    split: &DatasetSplit,
    store: &EmbeddingStore,
    config: &StanceConfig,
) -> Result<(MatchLstmModel, Vec<f64>)> {
    let examples = stance_examples(split, store, config)?;
    train_stance_logged(&examples, store, config)
}

/// Trains every model on `split`. The stance embedding dimension is taken
/// from `embeddings`.
pub fn train_models(
    split: &DatasetSplit,
    embeddings: Arc<EmbeddingStore>,
    config: &TrainConfig,
) -> Result<(Models, TrainSummary)> {
    let start = Instant::now();
    let (features, gbdt, gbdt_losses) = fit_relatedness(split, embeddings.clone(), &config.features, &config.gbdt)?;
    let relatedness_seconds = start.elapsed().as_secs_f64();
    log::info!("relatedness models fitted in {relatedness_seconds:.1}s");
    let start = Instant::now();
    let stance_config = StanceConfig {
        embedding_dim: embeddings.dim(),
        ..config.stance.clone()
    };
    let (stance, stance_losses) = fit_stance(split, &embeddings, &stance_config)?;
    let stance_seconds = start.elapsed().as_secs_f64();
    log::info!("agreement model fitted in {stance_seconds:.1}s");
    let summary = TrainSummary {
        pairs: split.pairs.len(),
        related_pairs: split.pairs.iter().filter(|p| p.label.is_related()).count(),
        gbdt_losses,
        stance_losses,
        family_importance: family_importance(&gbdt, &features.config),
        relatedness_seconds,
        stance_seconds,
    };
    Ok((Models::new(features, gbdt, stance)?, summary))
}

/// Gain share per feature family, in column order of first appearance.
pub fn family_importance(gbdt: &GbdtModel, config: &FeatureConfig) -> Vec<(FeatureFamily, f64)> {
    let families = config.families();
    let grouped = gbdt.grouped_importance(&families);
    let mut seen = Vec::new();
    for (_, fam) in FEATURE_COLUMNS.iter().take(families.len()) {
        if !seen.iter().any(|(f, _)| f == fam) {
            seen.push((*fam, grouped.get(fam).copied().unwrap_or(0.0)));
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{SynthConfig, SynthCorpus};

    fn small() -> TrainConfig {
        let mut c = TrainConfig::default().with_seed(3);
        c.features.svd_rank = 8;
        c.gbdt.num_rounds = 20;
        c.stance.hidden_dim = 8;
        c.stance.epochs = 2;
        c
    }

    #[test]
    fn trains_end_to_end_on_synthetic_data() {
        let data = SynthCorpus::generate(&SynthConfig {
            topics: 6,
            ..SynthConfig::default()
        })
        .unwrap()
        .load()
        .unwrap();
        let (models, summary) = train_models(&data.train, data.embeddings.clone(), &small()).unwrap();
        assert_eq!(summary.gbdt_losses.len(), 20);
        assert_eq!(summary.stance_losses.len(), 2);
        assert!(summary.gbdt_losses.last() < summary.gbdt_losses.first());
        let total: f64 = summary.family_importance.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(models.stance.config.embedding_dim, data.embeddings.dim());
    }

    #[test]
    fn vocabulary_is_lowercase() {
        let data = SynthCorpus::generate(&SynthConfig {
            topics: 3,
            ..SynthConfig::default()
        })
        .unwrap()
        .load()
        .unwrap();
        let v = vocabulary([&data.train, &data.test]);
        assert!(!v.is_empty());
        assert!(v.iter().all(|w| *w == w.to_lowercase()));
    }
}
