//! Online composition of the two models: relatedness gate, agreement
//! scoring, and the three ranked evidence lists.

mod bm25;
mod engine;
mod models;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use bm25::{Bm25Index, BM25_B, BM25_K1};
pub use engine::{ClassifiedPair, Engine, PreparedQuestion, DEFAULT_POOL_SIZE};
pub use models::{Models, MODEL_FILES};

use crate::corpus::{ArticleId, Question, StanceLabel};
use crate::error::{Error, Result};
use crate::stancenet::KeySentence;

/// Articles with relatedness below this never reach the agreement model.
pub const REL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub rel: f64,
    /// Present iff `rel >= 0.5`.
    pub beta: Option<f64>,
    pub label: StanceLabel,
    pub p: f64,
}

impl PairVerdict {
    /// Applies the gate and the argmax rule. Below the gate the label is
    /// Unrelated with `p = 1 - rel`. Above it the candidates are Discuss
    /// with `rel` and whichever of Agree/Disagree matches the sign of
    /// `beta` with `|beta|`; a tie goes to Discuss.
    pub fn decide(rel: f64, beta: Option<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&rel) {
            return Err(Error::invalid(format!("relatedness {rel} outside [0, 1]")));
        }
        if rel < REL_THRESHOLD {
            return Ok(PairVerdict {
                rel,
                beta: None,
                label: StanceLabel::Unrelated,
                p: 1.0 - rel,
            });
        }
        let beta = beta.ok_or_else(|| Error::invalid("related pair without an agreement score"))?;
        let (label, p) = if beta > 0.0 && beta > rel {
            (StanceLabel::Agree, beta)
        } else if beta < 0.0 && -beta > rel {
            (StanceLabel::Disagree, -beta)
        } else {
            (StanceLabel::Discuss, rel)
        };
        Ok(PairVerdict {
            rel,
            beta: Some(beta),
            label,
            p,
        })
    }
}

/// Maximum list lengths, `(3, 3, 5)` by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListSizes {
    pub agree: usize,
    pub disagree: usize,
    pub discuss: usize,
}

impl Default for ListSizes {
    fn default() -> Self {
        ListSizes {
            agree: 3,
            disagree: 3,
            discuss: 5,
        }
    }
}

/// Question plus the ids of its candidate articles.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub question: Question,
    pub ids: Vec<ArticleId>,
}

impl CandidateSet {
    /// Drops repeated ids, keeping first occurrences.
    pub fn new(question: Question, ids: impl IntoIterator<Item = ArticleId>) -> Self {
        let mut seen = std::collections::HashSet::new();
        let ids = ids.into_iter().filter(|id| seen.insert(*id)).collect();
        CandidateSet { question, ids }
    }
}

/// One scored candidate as fed to [`rank_candidates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub article_id: ArticleId,
    pub title: String,
    pub verdict: PairVerdict,
    pub key_sentences: Vec<KeySentence>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub agree: Vec<RankedItem>,
    pub disagree: Vec<RankedItem>,
    pub discuss: Vec<RankedItem>,
}

impl QueryResult {
    pub fn lists(&self) -> [(StanceLabel, &[RankedItem]); 3] {
        [
            (StanceLabel::Agree, &self.agree),
            (StanceLabel::Disagree, &self.disagree),
            (StanceLabel::Discuss, &self.discuss),
        ]
    }
}

fn by_score_then_id(a: &RankedItem, b: &RankedItem, key: fn(&PairVerdict) -> f64) -> Ordering {
    key(&b.verdict)
        .total_cmp(&key(&a.verdict))
        .then(a.article_id.cmp(&b.article_id))
}

/// Splits verdicts into the three lists. Agree and disagree are ordered by
/// `|beta|`, discuss by `rel`, ties by ascending article id; unrelated
/// items are dropped.
pub fn rank_candidates(items: Vec<RankedItem>, sizes: ListSizes) -> QueryResult {
    let mut out = QueryResult::default();
    for item in items {
        match item.verdict.label {
            StanceLabel::Agree => out.agree.push(item),
            StanceLabel::Disagree => out.disagree.push(item),
            StanceLabel::Discuss => out.discuss.push(item),
            StanceLabel::Unrelated => {}
        }
    }
    let abs_beta = |v: &PairVerdict| v.beta.map_or(0.0, f64::abs);
    let rel = |v: &PairVerdict| v.rel;
    out.agree.sort_by(|a, b| by_score_then_id(a, b, abs_beta));
    out.disagree.sort_by(|a, b| by_score_then_id(a, b, abs_beta));
    out.discuss.sort_by(|a, b| by_score_then_id(a, b, rel));
    out.agree.truncate(sizes.agree);
    out.disagree.truncate(sizes.disagree);
    out.discuss.truncate(sizes.discuss);
    out
}
