//! Article and question types, FNC-1 ingestion, and the text utilities every
//! other module builds on.

mod entities;
mod load;
mod sentences;
mod stopwords;
mod tokenize;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

pub use entities::{entity_surfaces, extract_entities, EntityMention};
pub use load::{
    load_bodies, load_bodies_from_reader, load_entity_sidecar, load_stances, load_stances_from_reader,
    parse_entity_sidecar,
};
pub use sentences::split_sentences;
pub use stopwords::{is_stopword, stopword_count, STOPWORDS_FILE};
pub use tokenize::{token_spans, tokenize, TokenSpan};

use crate::error::{Error, Result};

pub type ArticleId = u32;

#[derive(Debug)]
pub struct Article {
    pub id: ArticleId,
    pub text: String,
    pub tokens: Vec<String>,
    sentences: OnceLock<Vec<String>>,
    entities: OnceLock<Vec<String>>,
}

impl Article {
    pub fn new(id: ArticleId, text: impl Into<String>) -> Self {
        let text = text.into();
        Article {
            id,
            tokens: tokenize(&text),
            text,
            sentences: OnceLock::new(),
            entities: OnceLock::new(),
        }
    }

    /// Builds an article whose entity bag comes from an external annotation
    /// instead of the capitalization heuristic.
    pub fn with_entities(id: ArticleId, text: impl Into<String>, entities: Vec<String>) -> Self {
        let article = Article::new(id, text);
        let _ = article.entities.set(entities);
        article
    }

    pub fn sentences(&self) -> &[String] {
        self.sentences.get_or_init(|| split_sentences(&self.text))
    }

    pub fn entities(&self) -> &[String] {
        self.entities.get_or_init(|| entity_surfaces(&self.text))
    }

    /// First sentence, used as a display title.
    pub fn title(&self) -> &str {
        self.sentences().first().map_or("", String::as_str)
    }
}

impl Clone for Article {
    fn clone(&self) -> Self {
        let copy = Article {
            id: self.id,
            text: self.text.clone(),
            tokens: self.tokens.clone(),
            sentences: OnceLock::new(),
            entities: OnceLock::new(),
        };
        if let Some(e) = self.entities.get() {
            let _ = copy.entities.set(e.clone());
        }
        copy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub text: String,
    pub tokens: Vec<String>,
    pub entities: Vec<String>,
}

impl Question {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        Question {
            tokens: tokenize(&text),
            entities: entity_surfaces(&text),
            text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Agree,
    Disagree,
    Discuss,
    Unrelated,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 4] = [
        StanceLabel::Agree,
        StanceLabel::Disagree,
        StanceLabel::Discuss,
        StanceLabel::Unrelated,
    ];

    pub fn is_related(self) -> bool {
        self != StanceLabel::Unrelated
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Agree => "agree",
            StanceLabel::Disagree => "disagree",
            StanceLabel::Discuss => "discuss",
            StanceLabel::Unrelated => "unrelated",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StanceLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "agree" => Ok(StanceLabel::Agree),
            "disagree" => Ok(StanceLabel::Disagree),
            "discuss" => Ok(StanceLabel::Discuss),
            "unrelated" => Ok(StanceLabel::Unrelated),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StancePair {
    pub question: Arc<Question>,
    pub article_id: ArticleId,
    pub label: StanceLabel,
}

/// Articles keyed by id, iterated in ascending id order.
#[derive(Debug, Clone, Default)]
pub struct ArticleStore {
    articles: BTreeMap<ArticleId, Article>,
}

impl ArticleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, article: Article) -> Result<()> {
        if self.articles.contains_key(&article.id) {
            return Err(Error::DuplicateArticle(article.id));
        }
        self.articles.insert(article.id, article);
        Ok(())
    }

    pub fn get(&self, id: ArticleId) -> Option<&Article> {
        self.articles.get(&id)
    }

    pub fn contains(&self, id: ArticleId) -> bool {
        self.articles.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Article> {
        self.articles.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = ArticleId> + '_ {
        self.articles.keys().copied()
    }

    /// Replaces heuristic entity bags with annotated ones where available.
    pub fn with_entity_overrides(self, overrides: &HashMap<ArticleId, Vec<String>>) -> Self {
        let articles = self
            .articles
            .into_iter()
            .map(|(id, a)| match overrides.get(&id) {
                Some(ents) => (id, Article::with_entities(id, a.text, ents.clone())),
                None => (id, a),
            })
            .collect();
        ArticleStore { articles }
    }

    /// Restricts the store to `ids`, ignoring unknown ones.
    pub fn subset(&self, ids: impl IntoIterator<Item = ArticleId>) -> ArticleStore {
        let articles = ids
            .into_iter()
            .filter_map(|id| self.articles.get(&id).map(|a| (id, a.clone())))
            .collect();
        ArticleStore { articles }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub pairs: Vec<StancePair>,
    pub articles: Arc<ArticleStore>,
}

/// Fraction of pairs per label, indexed by [`StanceLabel::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelDistribution {
    pub total: usize,
    pub counts: [usize; 4],
}

impl LabelDistribution {
    pub fn share(&self, label: StanceLabel) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.counts[label.index()] as f64 / self.total as f64
        }
    }
}

impl DatasetSplit {
    pub fn load(
        name: SplitName,
        bodies: impl AsRef<std::path::Path>,
        stances: impl AsRef<std::path::Path>,
    ) -> Result<Self> {
        let articles = load_bodies(bodies)?;
        let pairs = load_stances(stances, &articles)?;
        Ok(Self::from_pairs(name, pairs, &articles))
    }

    /// Split over `pairs`, keeping only the articles they reference.
    pub fn from_pairs(name: SplitName, pairs: Vec<StancePair>, store: &ArticleStore) -> Self {
        let referenced: std::collections::BTreeSet<ArticleId> = pairs.iter().map(|p| p.article_id).collect();
        let articles = Arc::new(store.subset(referenced));
        DatasetSplit { name, pairs, articles }
    }

    pub fn label_distribution(&self) -> LabelDistribution {
        let mut counts = [0usize; 4];
        for p in &self.pairs {
            counts[p.label.index()] += 1;
        }
        LabelDistribution {
            total: self.pairs.len(),
            counts,
        }
    }

    /// Distinct questions in order of first appearance.
    pub fn questions(&self) -> Vec<Arc<Question>> {
        let mut seen = std::collections::HashSet::new();
        self.pairs
            .iter()
            .filter(|p| seen.insert(p.question.text.as_str()))
            .map(|p| Arc::clone(&p.question))
            .collect()
    }

    /// Pairs grouped by exact question text, groups in first-appearance order.
    pub fn pools(&self) -> Vec<(Arc<Question>, Vec<&StancePair>)> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut groups: Vec<(Arc<Question>, Vec<&StancePair>)> = Vec::new();
        for p in &self.pairs {
            let slot = *index.entry(p.question.text.as_str()).or_insert_with(|| {
                groups.push((Arc::clone(&p.question), Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(p);
        }
        groups
    }

    pub fn article(&self, id: ArticleId) -> Option<&Article> {
        self.articles.get(id)
    }
}
