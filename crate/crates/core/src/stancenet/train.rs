use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{backward, embed, forward, head_targets, question_matrix, EncodedPair, MatchLstmModel, StanceConfig};
use crate::corpus::StanceLabel;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::par;

/// Examples per gradient chunk. Chunks are reduced in order, so the summed
/// gradient does not depend on how many threads evaluate them.
const GRAD_CHUNK: usize = 8;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub pair: EncodedPair,
    pub label: StanceLabel,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

fn class_weight(config: &StanceConfig, label: StanceLabel) -> f64 {
    match (config.class_weights, label) {
        (None, _) => 1.0,
        (Some(w), StanceLabel::Agree) => w[0],
        (Some(w), StanceLabel::Disagree) => w[1],
        (Some(w), _) => w[2],
    }
}

/// Loss and gradient summed over `batch`.
fn batch_gradient(model: &MatchLstmModel, batch: &[&TrainingExample], store: &EmbeddingStore) -> (f64, Vec<f64>) {
    let layout = model.layout();
    let params = model.params();
    let parts = par::map_chunks(batch, GRAD_CHUNK, |chunk| {
        let mut grad = vec![0.0; layout.total];
        let mut loss = 0.0;
        for ex in chunk {
            let (xq, m) = question_matrix(&ex.pair.question, store);
            let xd = embed(&ex.pair.article, store);
            let n = ex.pair.article.len();
            let trace = forward::forward(layout, params, &xq, m, &xd, n, true);
            let targets = head_targets(ex.label).expect("labels checked before training");
            let w = class_weight(&model.config, ex.label);
            loss += backward::backward(layout, params, &trace, &xq, &xd, targets, w, &mut grad);
        }
        (loss, grad)
    });
    let mut total = vec![0.0; layout.total];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
    }
    (loss, total)
}

/// Trains the agreement model on gold-related pairs.
pub fn train_stance(
    examples: &[TrainingExample],
    store: &EmbeddingStore,
    config: &StanceConfig,
) -> Result<MatchLstmModel> {
    train_stance_logged(examples, store, config).map(|(m, _)| m)
}

/// Like [`train_stance`], also returning the mean per-example loss of each
/// epoch as seen during that epoch.
pub fn train_stance_logged(
    examples: &[TrainingExample],
    store: &EmbeddingStore,
    config: &StanceConfig,
) -> Result<(MatchLstmModel, Vec<f64>)> {
    config.validate()?;
    if store.dim() != config.embedding_dim {
        return Err(Error::Dimension {
            expected: config.embedding_dim,
            actual: store.dim(),
        });
    }
    if let Some(ex) = examples.iter().find(|e| !e.label.is_related()) {
        return Err(Error::invalid(format!(
            "agreement training got an {} example",
            ex.label
        )));
    }
    let usable: Vec<&TrainingExample> = examples.iter().filter(|e| !e.pair.is_empty()).collect();
    if usable.is_empty() {
        return Err(Error::invalid("no agreement training examples with embedded words"));
    }
    if usable.len() < examples.len() {
        log::info!(
            "skipping {} agreement examples without embedded words",
            examples.len() - usable.len()
        );
    }

    let mut model = MatchLstmModel::init(config, config.seed)?;
    let mut adam = Adam::new(model.params().len());
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1 + epoch as u64));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&TrainingExample> = idx.iter().map(|&i| usable[i]).collect();
            let (loss, mut grad) = batch_gradient(&model, &batch, store);
            epoch_loss += loss;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > config.clip_norm {
                let s = config.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.step(model.params_mut(), &grad, config.learning_rate);
        }
        let mean = epoch_loss / usable.len() as f64;
        log::info!("agreement epoch {}/{}: mean loss {:.5}", epoch + 1, config.epochs, mean);
        losses.push(mean);
    }
    Ok((model, losses))
}
