use std::collections::{BTreeMap, HashMap};

use crate::container::{ByteReader, ByteWriter};
use crate::corpus::is_stopword;
use crate::error::{Error, Result};

fn smooth_idf(n_docs: usize, df: usize) -> f64 {
    ((n_docs as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
}

/// Inverse document frequencies over arbitrary string terms.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    doc_count: usize,
    weights: HashMap<String, f64>,
}

impl IdfTable {
    /// Counts each term once per document; keeps terms with `df >= min_df`.
    pub fn fit<D, T>(docs: D, min_df: usize) -> Result<Self>
    where
        D: IntoIterator,
        D::Item: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n = 0usize;
        for doc in docs {
            n += 1;
            let mut seen: Vec<String> = doc.into_iter().map(|t| t.as_ref().to_string()).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        if n == 0 {
            return Err(Error::invalid("cannot fit IDF on an empty corpus"));
        }
        let weights = df
            .into_iter()
            .filter(|&(_, d)| d >= min_df)
            .map(|(t, d)| (t, smooth_idf(n, d)))
            .collect();
        Ok(IdfTable { doc_count: n, weights })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.weights.get(term).copied()
    }

    /// IDF of `term`, or the weight of a never-seen term (df = 0).
    pub fn weight(&self, term: &str) -> f64 {
        self.get(term).unwrap_or_else(|| smooth_idf(self.doc_count, 0))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        let sorted: BTreeMap<&String, &f64> = self.weights.iter().collect();
        w.u64(self.doc_count as u64).u64(sorted.len() as u64);
        for (t, &v) in sorted {
            w.str(t).f64(v);
        }
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let doc_count = r.u64()? as usize;
        let n = r.u64()? as usize;
        let mut weights = HashMap::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let t = r.str()?;
            weights.insert(t, r.f64()?);
        }
        Ok(IdfTable { doc_count, weights })
    }
}

/// Sparse vector as (column, value) pairs sorted by column.
pub type SparseVec = Vec<(usize, f64)>;

/// Vocabulary with column indices plus word IDF weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    terms: Vec<String>,
    vocabulary: HashMap<String, usize>,
    idf: IdfTable,
}

/// Fits TF-IDF on tokenized documents.
///
/// `idf(w) = ln((N + 1) / (df(w) + 1)) + 1`; the vocabulary is every
/// non-stopword with `df >= min_df`, indexed in lexicographic order.
pub fn fit_tfidf<S: AsRef<str>>(docs: &[Vec<S>], min_df: usize) -> Result<TfIdfModel> {
    let filtered = docs.iter().map(|d| {
        d.iter()
            .map(AsRef::as_ref)
            .filter(|t| !is_stopword(t))
            .collect::<Vec<&str>>()
    });
    let idf = IdfTable::fit(filtered, min_df)?;
    let mut terms: Vec<String> = idf.weights.keys().cloned().collect();
    terms.sort_unstable();
    let vocabulary = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(TfIdfModel { terms, vocabulary, idf })
}

impl TfIdfModel {
    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_count(&self) -> usize {
        self.idf.doc_count()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.idf.get(term)
    }

    /// IDF, falling back to the unseen-term weight outside the vocabulary.
    pub fn weight(&self, term: &str) -> f64 {
        self.idf.weight(term)
    }

    /// L2-normalized term-count × IDF vector over the vocabulary.
    /// Out-of-vocabulary tokens contribute nothing.
    pub fn transform<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&c) = self.vocabulary.get(t.as_ref()) {
                *counts.entry(c).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = counts
            .into_iter()
            .map(|(c, tf)| (c, tf * self.idf.weights[&self.terms[c]]))
            .collect();
        let norm = v.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|(_, x)| *x /= norm);
        }
        v
    }

    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        self.idf.encode(w);
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let idf = IdfTable::decode(r)?;
        let mut terms: Vec<String> = idf.weights.keys().cloned().collect();
        terms.sort_unstable();
        let vocabulary = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(TfIdfModel { terms, vocabulary, idf })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter().map(|d| crate::corpus::tokenize(d)).collect()
    }

    #[test]
    fn idf_values() {
        let d = docs(&["alpha beta", "alpha gamma", "alpha"]);
        let m = fit_tfidf(&d, 1).unwrap();
        assert!((m.idf("alpha").unwrap() - 1.0).abs() < 1e-15);
        let expected = (4.0f64 / 2.0).ln() + 1.0;
        assert!((m.idf("beta").unwrap() - expected).abs() < 1e-12);
        assert!((m.idf("beta").unwrap() - 1.693_147_180_559_945).abs() < 1e-9);
        for t in ["alpha", "beta", "gamma"] {
            assert!(m.idf(t).unwrap() > 0.0);
        }
    }

    #[test]
    fn min_df_and_stopwords() {
        let d = docs(&["the alpha beta", "the alpha gamma", "alpha"]);
        let m = fit_tfidf(&d, 2).unwrap();
        assert_eq!(m.vocab_size(), 1);
        assert!(m.idf("the").is_none());
        assert!(m.column("beta").is_none());
        assert!((m.weight("beta") - ((4.0f64).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let d: Vec<Vec<String>> = vec![];
        assert!(fit_tfidf(&d, 1).is_err());
    }

    #[test]
    fn transform_is_unit_norm() {
        let d = docs(&["alpha beta beta", "alpha gamma"]);
        let m = fit_tfidf(&d, 1).unwrap();
        let v = m.transform(&crate::corpus::tokenize("beta beta alpha unknown"));
        let norm: f64 = v.iter().map(|(_, x)| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(m.transform::<&str>(&[]).is_empty());
    }
}
