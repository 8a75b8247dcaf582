//! Key-sentence selection and the match-LSTM agreement model.
//!
//! Three LSTMs encode the question, the article's key sentences, and the
//! attention-matched article sequence. Two independent sigmoid heads read the
//! final matching state and combine into a signed agreement score.

mod backward;
mod forward;
mod gradcheck;
mod io;
mod params;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use forward::{attention_step, lstm_step};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use io::SECTION_TAG;
pub use params::{AttentionParams, Gate, Layout, LstmLayout, LstmParams, ParamBlock, StanceConfig};
pub use train::{train_stance, train_stance_logged, TrainingExample};

use crate::corpus::{tokenize, Article, Question, StanceLabel};
use crate::embeddings::{average_embedding, cosine, EmbeddingStore};
use crate::error::{Error, Result};
use crate::gbdt::sigmoid;

/// Token id of the zero-vector separator between key sentences.
pub const BOUNDARY: u32 = u32::MAX;

/// Similarity assigned to a sentence or question without any embedded word.
pub const NO_EMBEDDING_SIMILARITY: f64 = -2.0;

/// Outputs of the two heads and the signed score derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementScores {
    pub score_agree: f64,
    pub score_disagree: f64,
    pub beta: f64,
}

impl AgreementScores {
    /// `beta` is the agree score when it strictly wins and the negated
    /// disagree score otherwise, equality included.
    pub fn from_heads(score_agree: f64, score_disagree: f64) -> Self {
        let beta = if score_agree > score_disagree {
            score_agree
        } else {
            -score_disagree
        };
        AgreementScores {
            score_agree,
            score_disagree,
            beta,
        }
    }

    /// Returned when neither side has an embedded word.
    pub fn fallback() -> Self {
        Self::from_heads(0.5, 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeySentence {
    /// Position of the sentence in the article.
    pub index: usize,
    pub text: String,
    pub similarity: f64,
}

/// Top sentences by similarity, most similar first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeySentenceSelection {
    pub sentences: Vec<KeySentence>,
    pub k: usize,
}

impl KeySentenceSelection {
    pub fn token_lists(&self) -> Vec<Vec<String>> {
        self.sentences.iter().map(|s| tokenize(&s.text)).collect()
    }
}

/// Question embedding used for sentence ranking: stopwords skipped.
pub fn question_vector(tokens: &[String], store: &EmbeddingStore) -> Option<Vec<f64>> {
    average_embedding(tokens, store, true)
}

/// Picks the `k` sentences whose mean word vector is most cosine-similar to
/// the question's. Ties keep article order.
pub fn select_key_sentences(
    question: &Question,
    article: &Article,
    k: usize,
    store: &EmbeddingStore,
) -> Result<KeySentenceSelection> {
    let qv = question_vector(&question.tokens, store);
    rank_sentences(qv.as_deref(), article.sentences(), k, store)
}

/// [`select_key_sentences`] with a precomputed question vector.
pub fn rank_sentences(
    question_vec: Option<&[f64]>,
    sentences: &[String],
    k: usize,
    store: &EmbeddingStore,
) -> Result<KeySentenceSelection> {
    if k == 0 {
        return Err(Error::invalid("key sentence count must be at least 1"));
    }
    let mut scored = Vec::with_capacity(sentences.len());
    for (index, text) in sentences.iter().enumerate() {
        let sv = average_embedding(&tokenize(text), store, true);
        let similarity = match (question_vec, sv) {
            (Some(q), Some(s)) => cosine(q, &s)?,
            _ => NO_EMBEDDING_SIMILARITY,
        };
        scored.push(KeySentence {
            index,
            text: text.clone(),
            similarity,
        });
    }
    scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.index.cmp(&b.index)));
    scored.truncate(k);
    Ok(KeySentenceSelection { sentences: scored, k })
}

/// Token-id sequences fed to the model. Out-of-vocabulary words are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EncodedPair {
    pub question: Vec<u32>,
    pub article: Vec<u32>,
}

impl EncodedPair {
    pub fn encode<S: AsRef<str>>(
        question_tokens: &[S],
        key_sentences: &[Vec<S>],
        store: &EmbeddingStore,
        config: &StanceConfig,
    ) -> Self {
        let question: Vec<u32> = question_tokens
            .iter()
            .filter_map(|t| store.lookup(t.as_ref()))
            .take(config.max_question_len)
            .collect();
        let mut article = Vec::new();
        for sentence in key_sentences {
            let ids: Vec<u32> = sentence.iter().filter_map(|t| store.lookup(t.as_ref())).collect();
            if ids.is_empty() {
                continue;
            }
            if !article.is_empty() {
                article.push(BOUNDARY);
            }
            article.extend(ids);
        }
        article.truncate(config.max_article_len);
        EncodedPair { question, article }
    }

    pub fn is_empty(&self) -> bool {
        self.question.is_empty() && self.article.is_empty()
    }
}

/// Row-major `len × dim` matrix of word vectors; boundaries are zero rows.
pub(crate) fn embed(ids: &[u32], store: &EmbeddingStore) -> Vec<f64> {
    let dim = store.dim();
    let mut out = vec![0.0; ids.len() * dim];
    for (row, &id) in ids.iter().enumerate() {
        if id != BOUNDARY {
            for (o, &v) in out[row * dim..(row + 1) * dim].iter_mut().zip(store.row(id)) {
                *o = v as f64;
            }
        }
    }
    out
}

/// Question matrix with the empty case replaced by a single zero token so
/// attention always has something to attend to.
pub(crate) fn question_matrix(ids: &[u32], store: &EmbeddingStore) -> (Vec<f64>, usize) {
    if ids.is_empty() {
        (vec![0.0; store.dim()], 1)
    } else {
        (embed(ids, store), ids.len())
    }
}

/// Two-head targets: agree → (1, 0), disagree → (0, 1), discuss → (0, 0).
pub fn head_targets(label: StanceLabel) -> Result<(f64, f64)> {
    match label {
        StanceLabel::Agree => Ok((1.0, 0.0)),
        StanceLabel::Disagree => Ok((0.0, 1.0)),
        StanceLabel::Discuss => Ok((0.0, 0.0)),
        StanceLabel::Unrelated => Err(Error::invalid("agreement model only sees related pairs")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchLstmModel {
    pub config: StanceConfig,
    layout: Layout,
    params: Vec<f64>,
}

impl MatchLstmModel {
    /// Uniform initialization in `[-init_scale, init_scale]` with zero head
    /// biases.
    pub fn init(config: &StanceConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config.embedding_dim, config.hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = config.init_scale;
        let mut params: Vec<f64> = (0..layout.total)
            .map(|_| if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 })
            .collect();
        params[layout.agree_b] = 0.0;
        params[layout.disagree_b] = 0.0;
        Ok(MatchLstmModel {
            config: config.clone(),
            layout,
            params,
        })
    }

    pub fn zeros(config: &StanceConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config.embedding_dim, config.hidden_dim);
        Ok(MatchLstmModel {
            config: config.clone(),
            params: vec![0.0; layout.total],
            layout,
        })
    }

    pub fn from_params(config: &StanceConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config.embedding_dim, config.hidden_dim);
        if params.len() != layout.total {
            return Err(Error::Dimension {
                expected: layout.total,
                actual: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite model parameter"));
        }
        Ok(MatchLstmModel {
            config: config.clone(),
            layout,
            params,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn qlstm(&self) -> LstmParams<'_> {
        LstmParams::from_flat(&self.layout.qlstm, &self.params)
    }

    pub fn dlstm(&self) -> LstmParams<'_> {
        LstmParams::from_flat(&self.layout.dlstm, &self.params)
    }

    pub fn mlstm(&self) -> LstmParams<'_> {
        LstmParams::from_flat(&self.layout.mlstm, &self.params)
    }

    pub fn attention(&self) -> AttentionParams<'_> {
        AttentionParams::from_flat(&self.layout, &self.params)
    }

    fn check_dims(&self, xq: &[f64], m: usize, xd: &[f64], n: usize) -> Result<()> {
        let l = self.config.embedding_dim;
        if m == 0 {
            return Err(Error::invalid("question sequence must have at least one step"));
        }
        for (len, steps) in [(xq.len(), m), (xd.len(), n)] {
            if len != steps * l {
                return Err(Error::Dimension {
                    expected: steps * l,
                    actual: len,
                });
            }
        }
        Ok(())
    }

    /// Scores already-embedded sequences (`m × l` and `n × l`, `m ≥ 1`).
    pub fn score_embedded(&self, xq: &[f64], m: usize, xd: &[f64], n: usize) -> Result<AgreementScores> {
        self.check_dims(xq, m, xd, n)?;
        let t = forward::forward(&self.layout, &self.params, xq, m, xd, n, false);
        Ok(AgreementScores::from_heads(
            sigmoid(t.logit_agree),
            sigmoid(t.logit_disagree),
        ))
    }

    /// Attention weights (`n × m`) of one evaluation, for inspection.
    pub fn attention_weights(&self, xq: &[f64], m: usize, xd: &[f64], n: usize) -> Result<Vec<f64>> {
        self.check_dims(xq, m, xd, n)?;
        Ok(forward::forward(&self.layout, &self.params, xq, m, xd, n, false).alpha)
    }

    pub fn score_encoded(&self, pair: &EncodedPair, store: &EmbeddingStore) -> Result<AgreementScores> {
        if store.dim() != self.config.embedding_dim {
            return Err(Error::Dimension {
                expected: self.config.embedding_dim,
                actual: store.dim(),
            });
        }
        if pair.is_empty() {
            return Ok(AgreementScores::fallback());
        }
        let (xq, m) = question_matrix(&pair.question, store);
        let xd = embed(&pair.article, store);
        self.score_embedded(&xq, m, &xd, pair.article.len())
    }

    /// Loss of one embedded example and, when `grad` is given, its gradient
    /// added in place.
    pub fn loss_and_grad(
        &self,
        xq: &[f64],
        m: usize,
        xd: &[f64],
        n: usize,
        label: StanceLabel,
        grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        self.check_dims(xq, m, xd, n)?;
        let targets = head_targets(label)?;
        let record = grad.is_some();
        let t = forward::forward(&self.layout, &self.params, xq, m, xd, n, record);
        Ok(match grad {
            Some(g) => {
                if g.len() != self.layout.total {
                    return Err(Error::Dimension {
                        expected: self.layout.total,
                        actual: g.len(),
                    });
                }
                backward::backward(&self.layout, &self.params, &t, xq, xd, targets, 1.0, g)
            }
            None => {
                backward::bce_with_logit(t.logit_agree, targets.0)
                    + backward::bce_with_logit(t.logit_disagree, targets.1)
            }
        })
    }
}

/// Scores a question against the concatenated key sentences.
pub fn match_forward<S: AsRef<str>>(
    model: &MatchLstmModel,
    q_tokens: &[S],
    keysent_tokens: &[Vec<S>],
    store: &EmbeddingStore,
) -> Result<AgreementScores> {
    let pair = EncodedPair::encode(q_tokens, keysent_tokens, store, &model.config);
    model.score_encoded(&pair, store)
}

#[cfg(test)]
mod tests;
