//! Scoring a trained engine against a labelled split, and parameter sweeps.

mod experiment;
mod metrics;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use experiment::{run_experiment, SweepConfig, SweepPoint};
pub use metrics::{avg_ndcg, dcg_at_k, is_controversial, ndcg_at_k, relatedness_error, weighted_accuracy};

use crate::corpus::{ArticleId, DatasetSplit, Question, StanceLabel};
use crate::error::{Error, Result};
use crate::pipeline::{Engine, ListSizes};

/// Cutoffs for the agree, disagree and discuss lists.
pub const NDCG_K: [usize; 3] = [3, 3, 5];

/// Questions whose gold pool holds at least one agree and one disagree.
pub fn find_controversial(split: &DatasetSplit) -> Vec<Arc<Question>> {
    split
        .pools()
        .into_iter()
        .filter(|(_, pairs)| is_controversial(pairs.iter().map(|p| p.label)))
        .map(|(q, _)| q)
        .collect()
}

/// Outcome of one question's pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question: String,
    pub controversial: bool,
    /// Agree, disagree, discuss; `None` when the class has no gold article.
    pub ndcg: [Option<f64>; 3],
    pub gold: Vec<StanceLabel>,
    pub predicted: Vec<StanceLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub questions: usize,
    pub pairs: usize,
    pub relatedness_error: f64,
    pub weighted_accuracy: f64,
    pub ndcg_agree: Option<f64>,
    pub ndcg_disagree: Option<f64>,
    pub ndcg_discuss: Option<f64>,
    pub avg_ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub all: SubsetMetrics,
    pub controversial: SubsetMetrics,
    /// `confusion[gold][predicted]` in agree, disagree, discuss, unrelated
    /// order.
    pub confusion: [[u64; 4]; 4],
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Aggregates outcomes in their given order.
pub fn subset_metrics<'a>(outcomes: impl IntoIterator<Item = &'a QuestionOutcome>) -> Result<SubsetMetrics> {
    let outcomes: Vec<&QuestionOutcome> = outcomes.into_iter().collect();
    if outcomes.is_empty() {
        return Ok(SubsetMetrics::default());
    }
    let gold: Vec<StanceLabel> = outcomes.iter().flat_map(|o| o.gold.iter().copied()).collect();
    let pred: Vec<StanceLabel> = outcomes.iter().flat_map(|o| o.predicted.iter().copied()).collect();
    let per_class = |c: usize| mean(outcomes.iter().filter_map(|o| o.ndcg[c]));
    let lists: Vec<Vec<Option<f64>>> = outcomes.iter().map(|o| o.ndcg.to_vec()).collect();
    Ok(SubsetMetrics {
        questions: outcomes.len(),
        pairs: gold.len(),
        relatedness_error: relatedness_error(&pred, &gold)?,
        weighted_accuracy: weighted_accuracy(&pred, &gold)?,
        ndcg_agree: per_class(0),
        ndcg_disagree: per_class(1),
        ndcg_discuss: per_class(2),
        avg_ndcg: avg_ndcg(&lists),
    })
}

/// Classifies and ranks every question pool of `split` through `engine`.
/// The engine must hold every article the split references.
pub fn score_split(engine: &Engine, split: &DatasetSplit, sizes: ListSizes) -> Result<Vec<QuestionOutcome>> {
    let mut out = Vec::new();
    for (question, pairs) in split.pools() {
        let ids: Vec<ArticleId> = pairs.iter().map(|p| p.article_id).collect();
        let prepared = engine.prepare_question((*question).clone());
        let classified = engine.classify_pool(&prepared, &ids)?;
        let predicted: Vec<StanceLabel> = classified.iter().map(|c| c.verdict.label).collect();
        let gold: Vec<StanceLabel> = pairs.iter().map(|p| p.label).collect();

        // a repeated pair keeps its first gold label
        let mut gold_of: HashMap<ArticleId, StanceLabel> = HashMap::new();
        for p in &pairs {
            gold_of.entry(p.article_id).or_insert(p.label);
        }
        let mut seen = std::collections::HashSet::new();
        let unique: Vec<_> = classified.into_iter().filter(|c| seen.insert(c.article_id)).collect();
        let ranked = engine.rank(unique, sizes);
        let mut ndcg = [None; 3];
        for (slot, (class, list)) in ranked.lists().into_iter().enumerate() {
            let gains: Vec<bool> = list.iter().map(|it| gold_of[&it.article_id] == class).collect();
            let relevant = gold_of.values().filter(|&&g| g == class).count();
            ndcg[slot] = ndcg_at_k(&gains, relevant, NDCG_K[slot])?;
        }
        out.push(QuestionOutcome {
            question: question.text.clone(),
            controversial: is_controversial(gold.iter().copied()),
            ndcg,
            gold,
            predicted,
        });
    }
    Ok(out)
}

impl EvalReport {
    pub fn from_outcomes(name: impl Into<String>, outcomes: &[QuestionOutcome]) -> Result<Self> {
        let mut confusion = [[0u64; 4]; 4];
        for o in outcomes {
            for (g, p) in o.gold.iter().zip(&o.predicted) {
                confusion[g.index()][p.index()] += 1;
            }
        }
        Ok(EvalReport {
            name: name.into(),
            all: subset_metrics(outcomes)?,
            controversial: subset_metrics(outcomes.iter().filter(|o| o.controversial))?,
            confusion,
        })
    }

    /// Evaluates `engine` on `split` with the standard list sizes.
    pub fn evaluate(name: impl Into<String>, engine: &Engine, split: &DatasetSplit) -> Result<Self> {
        if split.pairs.is_empty() {
            return Err(Error::invalid("evaluation split has no pairs"));
        }
        Self::from_outcomes(name, &score_split(engine, split, ListSizes::default())?)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}%", 100.0 * v))
}

/// Plain-text tables: one for all questions, one for the controversial
/// subset, then the confusion matrix of each report.
pub fn render_tables(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    for (title, pick) in [
        (
            "all questions",
            (|r: &EvalReport| r.all) as fn(&EvalReport) -> SubsetMetrics,
        ),
        ("controversial questions", |r: &EvalReport| r.controversial),
    ] {
        let _ = writeln!(out, "{title}");
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>8}  {:>8}  {:>10}  {:>10}  {:>9}  {:>9}",
            "run", "questions", "rel.err", "w.acc", "agree@3", "disagree@3", "discuss@5", "avg.ndcg"
        );
        for r in reports {
            let m = pick(r);
            let _ = writeln!(
                out,
                "{:<width$}  {:>9}  {:>8}  {:>8}  {:>10}  {:>10}  {:>9}  {:>9}",
                r.name,
                m.questions,
                pct((m.pairs > 0).then_some(m.relatedness_error)),
                pct((m.pairs > 0).then_some(m.weighted_accuracy)),
                pct(m.ndcg_agree),
                pct(m.ndcg_disagree),
                pct(m.ndcg_discuss),
                pct(m.avg_ndcg),
            );
        }
        out.push('\n');
    }
    for r in reports {
        let _ = writeln!(out, "confusion for {} (rows gold, columns predicted)", r.name);
        let _ = writeln!(
            out,
            "{:<10}{:>10}{:>10}{:>10}{:>10}",
            "", "agree", "disagree", "discuss", "unrelated"
        );
        for g in StanceLabel::ALL {
            let row = r.confusion[g.index()];
            let _ = writeln!(
                out,
                "{:<10}{:>10}{:>10}{:>10}{:>10}",
                g.as_str(),
                row[0],
                row[1],
                row[2],
                row[3]
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use StanceLabel::*;

    fn outcome(
        controversial: bool,
        ndcg: [Option<f64>; 3],
        gold: Vec<StanceLabel>,
        predicted: Vec<StanceLabel>,
    ) -> QuestionOutcome {
        QuestionOutcome {
            question: String::new(),
            controversial,
            ndcg,
            gold,
            predicted,
        }
    }

    #[test]
    fn report_aggregates_subsets() {
        let outs = vec![
            outcome(
                true,
                [Some(1.0), Some(0.5), None],
                vec![Agree, Disagree],
                vec![Agree, Discuss],
            ),
            outcome(
                false,
                [None, None, Some(0.0)],
                vec![Discuss, Unrelated],
                vec![Discuss, Agree],
            ),
        ];
        let r = EvalReport::from_outcomes("x", &outs).unwrap();
        assert_eq!(r.all.questions, 2);
        assert_eq!(r.all.pairs, 4);
        assert_eq!(r.all.relatedness_error, 0.25);
        // score: 0.25+0.75 + 0.25 + 0.25+0.75 + 0 = 2.25; max 3×1 + 0.25 = 3.25
        assert_eq!(r.all.weighted_accuracy, 2.25 / 3.25);
        assert_eq!(r.all.ndcg_agree, Some(1.0));
        assert_eq!(r.all.ndcg_discuss, Some(0.0));
        assert_eq!(r.all.avg_ndcg, Some((0.75 + 0.0) / 2.0));
        assert_eq!(r.controversial.questions, 1);
        assert_eq!(r.controversial.avg_ndcg, Some(0.75));
        assert_eq!(r.confusion[Unrelated.index()][Agree.index()], 1);
        assert_eq!(r.confusion.iter().flatten().sum::<u64>(), 4);
        let back: EvalReport = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_json_line().contains("\"avg_ndcg\""));
        let table = render_tables(&[r]);
        assert!(table.contains("controversial questions"));
        assert!(table.contains("75.00%"));
    }

    #[test]
    fn empty_subset_is_zeroed() {
        let outs = vec![outcome(false, [None; 3], vec![Unrelated], vec![Unrelated])];
        let r = EvalReport::from_outcomes("x", &outs).unwrap();
        assert_eq!(r.controversial, SubsetMetrics::default());
        assert_eq!(r.all.avg_ndcg, None);
    }
}
