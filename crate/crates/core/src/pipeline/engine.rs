use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{rank_candidates, Bm25Index, CandidateSet, ListSizes, Models, PairVerdict, QueryResult, RankedItem};
use crate::corpus::{ArticleId, ArticleStore, Question};
use crate::error::{Error, Result};
use crate::features::PreparedText;
use crate::par;
use crate::stancenet::{match_forward, question_vector, rank_sentences, KeySentence};

/// Candidates retrieved when a query comes without an explicit pool.
pub const DEFAULT_POOL_SIZE: usize = 30;

/// Question-side quantities computed once per query.
#[derive(Debug, Clone)]
pub struct PreparedQuestion {
    pub question: Question,
    pub text: PreparedText,
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPair {
    pub article_id: ArticleId,
    pub verdict: PairVerdict,
    /// Empty for pairs that fail the relatedness gate.
    pub key_sentences: Vec<KeySentence>,
}

/// Immutable serving state: models, article store, per-article features
/// and the retrieval index.
#[derive(Debug)]
pub struct Engine {
    models: Arc<Models>,
    articles: Arc<ArticleStore>,
    prepared: HashMap<ArticleId, PreparedText>,
    index: Bm25Index,
}

impl Engine {
    pub fn new(models: Arc<Models>, articles: Arc<ArticleStore>) -> Result<Self> {
        let list: Vec<_> = articles.iter().collect();
        let texts = par::map(&list, |a| models.features.prepare_article(a));
        let prepared = list.iter().map(|a| a.id).zip(texts).collect();
        let index = Bm25Index::build(&articles)?;
        Ok(Engine {
            models,
            articles,
            prepared,
            index,
        })
    }

    pub fn models(&self) -> &Arc<Models> {
        &self.models
    }

    pub fn articles(&self) -> &Arc<ArticleStore> {
        &self.articles
    }

    pub fn prepare_question(&self, question: Question) -> PreparedQuestion {
        let text = self.models.features.prepare_question(&question);
        let vector = question_vector(&question.tokens, self.models.embeddings());
        PreparedQuestion { question, text, vector }
    }

    /// Relatedness gate, then key sentences and agreement for related pairs.
    pub fn classify_pair(&self, q: &PreparedQuestion, id: ArticleId) -> Result<ClassifiedPair> {
        let (article, prepared) = match (self.articles.get(id), self.prepared.get(&id)) {
            (Some(a), Some(p)) => (a, p),
            _ => return Err(Error::invalid(format!("unknown article id {id}"))),
        };
        let rel = self.models.relatedness(&q.text, prepared)?;
        if rel < super::REL_THRESHOLD {
            return Ok(ClassifiedPair {
                article_id: id,
                verdict: PairVerdict::decide(rel, None)?,
                key_sentences: Vec::new(),
            });
        }
        let store = self.models.embeddings();
        let stance = &self.models.stance;
        let selection = rank_sentences(
            q.vector.as_deref(),
            article.sentences(),
            stance.config.key_sentences,
            store,
        )?;
        let scores = match_forward(stance, &q.question.tokens, &selection.token_lists(), store)?;
        Ok(ClassifiedPair {
            article_id: id,
            verdict: PairVerdict::decide(rel, Some(scores.beta))?,
            key_sentences: selection.sentences,
        })
    }

    /// Classifies every id; output order follows `ids`.
    pub fn classify_pool(&self, q: &PreparedQuestion, ids: &[ArticleId]) -> Result<Vec<ClassifiedPair>> {
        par::map(ids, |&id| self.classify_pair(q, id)).into_iter().collect()
    }

    /// Top `n` articles by BM25.
    pub fn retrieve(&self, question: &Question, n: usize) -> Result<CandidateSet> {
        if n == 0 {
            return Err(Error::invalid("candidate count must be at least 1"));
        }
        let ids = self.index.search(&question.tokens, n).into_iter().map(|(id, _)| id);
        Ok(CandidateSet::new(question.clone(), ids))
    }

    /// Full online pipeline: retrieve unless `pool` is given, classify,
    /// rank.
    pub fn query(
        &self,
        question: &str,
        pool: Option<&[ArticleId]>,
        sizes: ListSizes,
        pool_size: usize,
    ) -> Result<QueryResult> {
        let question = Question::new(question.trim());
        if question.text.is_empty() {
            return Err(Error::invalid("empty question"));
        }
        let candidates = match pool {
            Some(ids) => CandidateSet::new(question, ids.iter().copied()),
            None => self.retrieve(&question, pool_size)?,
        };
        let prepared = self.prepare_question(candidates.question);
        let classified = self.classify_pool(&prepared, &candidates.ids)?;
        Ok(self.rank(classified, sizes))
    }

    /// Orders classified pairs into the three capped lists.
    pub fn rank(&self, classified: Vec<ClassifiedPair>, sizes: ListSizes) -> QueryResult {
        let items = classified
            .into_iter()
            .map(|c| RankedItem {
                title: self
                    .articles
                    .get(c.article_id)
                    .map_or_else(String::new, |a| a.title().to_string()),
                article_id: c.article_id,
                verdict: c.verdict,
                key_sentences: c.key_sentences,
            })
            .collect();
        rank_candidates(items, sizes)
    }
}
