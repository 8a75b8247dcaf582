use std::collections::{BTreeSet, HashMap};

use crate::corpus::{is_stopword, ArticleId, ArticleStore};
use crate::error::{Error, Result};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Okapi BM25 over non-stopword tokens.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    ids: Vec<ArticleId>,
    doc_len: Vec<f64>,
    avg_len: f64,
    /// term → (document position, term frequency)
    postings: HashMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn build(store: &ArticleStore) -> Result<Self> {
        if store.is_empty() {
            return Err(Error::invalid("cannot index an empty article store"));
        }
        let mut ids = Vec::with_capacity(store.len());
        let mut doc_len = Vec::with_capacity(store.len());
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for (pos, article) in store.iter().enumerate() {
            let mut tf: HashMap<&str, u32> = HashMap::new();
            let mut len = 0usize;
            for t in article.tokens.iter().filter(|t| !is_stopword(t)) {
                *tf.entry(t.as_str()).or_default() += 1;
                len += 1;
            }
            let mut terms: Vec<(&str, u32)> = tf.into_iter().collect();
            terms.sort_unstable();
            for (t, c) in terms {
                postings.entry(t.to_string()).or_default().push((pos as u32, c));
            }
            ids.push(article.id);
            doc_len.push(len as f64);
        }
        let avg_len = doc_len.iter().sum::<f64>() / doc_len.len() as f64;
        Ok(Bm25Index {
            ids,
            doc_len,
            avg_len,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`; zero for unseen terms.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.ids.len() as f64;
        match self.postings.get(term) {
            Some(p) => {
                let df = p.len() as f64;
                ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
            }
            None => 0.0,
        }
    }

    /// Score of every indexed article, in store order. Each distinct
    /// non-stopword query term counts once.
    pub fn scores<S: AsRef<str>>(&self, query_tokens: &[S]) -> Vec<(ArticleId, f64)> {
        let terms: BTreeSet<&str> = query_tokens
            .iter()
            .map(AsRef::as_ref)
            .filter(|t| !is_stopword(t))
            .collect();
        let mut acc = vec![0.0; self.ids.len()];
        for term in terms {
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for &(pos, tf) in postings {
                let tf = tf as f64;
                let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * self.doc_len[pos as usize] / self.avg_len);
                acc[pos as usize] += idf * tf * (BM25_K1 + 1.0) / (tf + norm);
            }
        }
        self.ids.iter().copied().zip(acc).collect()
    }

    /// Top `n` articles by score, ties broken by ascending id. Articles
    /// that match no query term are still eligible, after every match.
    pub fn search<S: AsRef<str>>(&self, query_tokens: &[S], n: usize) -> Vec<(ArticleId, f64)> {
        let mut scored = self.scores(query_tokens);
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(n);
        scored
    }
}
