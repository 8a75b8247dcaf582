use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{mean, EvalReport, SubsetMetrics};
use crate::corpus::DatasetSplit;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::pipeline::{Engine, Models};
use crate::stancenet::StanceConfig;
use crate::training::{fit_relatedness, fit_stance, TrainConfig};

/// Grid of key-sentence counts and epoch budgets, each run once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    pub epochs: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            ks: vec![1, 3, 5],
            epochs: vec![10],
            seeds: vec![42],
        }
    }
}

/// One grid point: a report per seed and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub epochs: usize,
    pub per_seed: Vec<(u64, EvalReport)>,
    /// Field-wise mean of `per_seed`; its confusion matrix is the sum.
    pub mean: EvalReport,
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    mean(values.flatten())
}

fn mean_subset(items: &[SubsetMetrics]) -> SubsetMetrics {
    SubsetMetrics {
        questions: items.first().map_or(0, |m| m.questions),
        pairs: items.first().map_or(0, |m| m.pairs),
        relatedness_error: mean(items.iter().map(|m| m.relatedness_error)).unwrap_or(0.0),
        weighted_accuracy: mean(items.iter().map(|m| m.weighted_accuracy)).unwrap_or(0.0),
        ndcg_agree: mean_opt(items.iter().map(|m| m.ndcg_agree)),
        ndcg_disagree: mean_opt(items.iter().map(|m| m.ndcg_disagree)),
        ndcg_discuss: mean_opt(items.iter().map(|m| m.ndcg_discuss)),
        avg_ndcg: mean_opt(items.iter().map(|m| m.avg_ndcg)),
    }
}

fn mean_report(name: String, reports: &[&EvalReport]) -> EvalReport {
    let mut confusion = [[0u64; 4]; 4];
    for r in reports {
        for (row, add) in confusion.iter_mut().zip(&r.confusion) {
            row.iter_mut().zip(add).for_each(|(c, a)| *c += a);
        }
    }
    let all: Vec<SubsetMetrics> = reports.iter().map(|r| r.all).collect();
    let contro: Vec<SubsetMetrics> = reports.iter().map(|r| r.controversial).collect();
    EvalReport {
        name,
        all: mean_subset(&all),
        controversial: mean_subset(&contro),
        confusion,
    }
}

/// Trains on `train` and evaluates on `test` for every grid point. The
/// relatedness models depend only on the seed, so they are fitted once per
/// seed and shared across the grid.
pub fn run_experiment(
    train: &DatasetSplit,
    test: &DatasetSplit,
    embeddings: Arc<EmbeddingStore>,
    base: &TrainConfig,
    sweep: &SweepConfig,
) -> Result<Vec<SweepPoint>> {
    if sweep.ks.is_empty() || sweep.epochs.is_empty() || sweep.seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one k, epoch count and seed"));
    }
    let grid: Vec<(usize, usize)> = sweep
        .ks
        .iter()
        .flat_map(|&k| sweep.epochs.iter().map(move |&e| (k, e)))
        .collect();
    let mut runs: Vec<Vec<(u64, EvalReport)>> = vec![Vec::new(); grid.len()];
    for &seed in &sweep.seeds {
        let config = base.clone().with_seed(seed);
        let (features, gbdt, _) = fit_relatedness(train, embeddings.clone(), &config.features, &config.gbdt)?;
        for (slot, &(k, epochs)) in grid.iter().enumerate() {
            let stance_config = StanceConfig {
                embedding_dim: embeddings.dim(),
                key_sentences: k,
                epochs,
                ..config.stance.clone()
            };
            let (stance, _) = fit_stance(train, &embeddings, &stance_config)?;
            let models = Models::new(features.clone(), gbdt.clone(), stance)?;
            let engine = Engine::new(Arc::new(models), test.articles.clone())?;
            let name = format!("k={k} epochs={epochs} seed={seed}");
            log::info!("evaluating {name}");
            runs[slot].push((seed, EvalReport::evaluate(name, &engine, test)?));
        }
    }
    Ok(grid
        .into_iter()
        .zip(runs)
        .map(|((k, epochs), per_seed)| {
            let refs: Vec<&EvalReport> = per_seed.iter().map(|(_, r)| r).collect();
            let mean = mean_report(format!("k={k} epochs={epochs}"), &refs);
            SweepPoint {
                k,
                epochs,
                per_seed,
                mean,
            }
        })
        .collect())
}
