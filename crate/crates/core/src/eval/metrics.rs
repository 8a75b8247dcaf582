//! Ranking and classification metrics. All functions are pure.

use crate::corpus::StanceLabel;
use crate::error::{Error, Result};

/// Discount applied at 1-based rank `i`: 1 for the first position, then
/// `1 / log2(i)`.
fn discount(i: usize) -> f64 {
    if i == 1 {
        1.0
    } else {
        1.0 / (i as f64).log2()
    }
}

/// `gain_1 + Σ_{i=2..K} gain_i / log2(i)` over the first `k` positions.
pub fn dcg_at_k(gains: &[bool], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Ok(gains
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &g)| g)
        .map(|(i, _)| discount(i + 1))
        .sum())
}

/// DCG@K over the ideal DCG@K with `relevant` ones placed first. `None`
/// when nothing is relevant, meaning the list is skipped.
pub fn ndcg_at_k(gains: &[bool], relevant: usize, k: usize) -> Result<Option<f64>> {
    let achieved = dcg_at_k(gains, k)?;
    let hits = gains.iter().take(k).filter(|&&g| g).count();
    if hits > relevant {
        return Err(Error::invalid(format!(
            "list has {hits} relevant items but only {relevant} exist"
        )));
    }
    let ideal: f64 = (1..=relevant.min(k)).map(discount).sum();
    if ideal == 0.0 {
        return Ok(None);
    }
    Ok(Some(achieved / ideal))
}

/// Per question, the mean over its non-skipped lists; then the mean over
/// questions that have at least one. `None` if no question qualifies.
pub fn avg_ndcg(per_question: &[Vec<Option<f64>>]) -> Option<f64> {
    let means: Vec<f64> = per_question
        .iter()
        .filter_map(|lists| {
            let kept: Vec<f64> = lists.iter().flatten().copied().collect();
            (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
        })
        .collect();
    (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
}

fn check_aligned(predictions: &[StanceLabel], gold: &[StanceLabel]) -> Result<()> {
    if predictions.len() != gold.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            actual: predictions.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::invalid("no pairs to score"));
    }
    Ok(())
}

/// Share of pairs whose related/unrelated collapse is wrong.
pub fn relatedness_error(predictions: &[StanceLabel], gold: &[StanceLabel]) -> Result<f64> {
    check_aligned(predictions, gold)?;
    let wrong = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.is_related() != g.is_related())
        .count();
    Ok(wrong as f64 / gold.len() as f64)
}

/// 0.25 for a correct related/unrelated call plus 0.75 for the exact label
/// on gold-related pairs, over the maximum attainable score.
pub fn weighted_accuracy(predictions: &[StanceLabel], gold: &[StanceLabel]) -> Result<f64> {
    check_aligned(predictions, gold)?;
    let mut score = 0.0;
    let mut max = 0.0;
    for (&p, &g) in predictions.iter().zip(gold) {
        max += 0.25;
        if p.is_related() == g.is_related() {
            score += 0.25;
        }
        if g.is_related() {
            max += 0.75;
            if p == g {
                score += 0.75;
            }
        }
    }
    Ok(score / max)
}

/// True when the labels include at least one agree and one disagree.
pub fn is_controversial(labels: impl IntoIterator<Item = StanceLabel>) -> bool {
    let (mut agree, mut disagree) = (false, false);
    for l in labels {
        agree |= l == StanceLabel::Agree;
        disagree |= l == StanceLabel::Disagree;
    }
    agree && disagree
}

#[cfg(test)]
mod tests {
    use super::*;
    use StanceLabel::*;

    #[test]
    fn dcg_hand_values() {
        assert_eq!(dcg_at_k(&[true, true, false], 3).unwrap(), 2.0);
        assert_eq!(dcg_at_k(&[false; 4], 3).unwrap(), 0.0);
        let v = dcg_at_k(&[false, false, true], 3).unwrap();
        assert!((v - 0.630_929_753_571_457_4).abs() < 1e-15);
        // positions past K are ignored
        assert_eq!(dcg_at_k(&[false, false, false, true], 3).unwrap(), 0.0);
        assert!(dcg_at_k(&[true], 0).is_err());
    }

    #[test]
    fn ndcg_hand_values() {
        assert_eq!(ndcg_at_k(&[true, true], 2, 3).unwrap(), Some(1.0));
        assert_eq!(ndcg_at_k(&[false, true], 1, 3).unwrap(), Some(1.0));
        let v = ndcg_at_k(&[false, false, true], 1, 3).unwrap().unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&[false, false], 0, 3).unwrap(), None);
        assert_eq!(ndcg_at_k(&[], 0, 5).unwrap(), None);
        assert_eq!(ndcg_at_k(&[], 2, 3).unwrap(), Some(0.0));
        assert!(ndcg_at_k(&[true, true], 1, 3).is_err());
        assert!(ndcg_at_k(&[true], 0, 3).is_err());
    }

    #[test]
    fn avg_ndcg_rules() {
        assert_eq!(avg_ndcg(&[vec![Some(1.0), Some(0.5), None]]), Some(0.75));
        assert_eq!(avg_ndcg(&[vec![None, None], vec![Some(0.5)]]), Some(0.5));
        assert_eq!(avg_ndcg(&[vec![None]]), None);
        assert_eq!(avg_ndcg(&[vec![Some(1.0)], vec![Some(0.0), Some(1.0)]]), Some(0.75));
    }

    #[test]
    fn relatedness_error_cases() {
        let gold = [Agree, Unrelated, Discuss, Unrelated];
        assert_eq!(relatedness_error(&gold, &gold).unwrap(), 0.0);
        // agree vs discuss still counts as related
        let pred = [Discuss, Unrelated, Discuss, Agree];
        assert_eq!(relatedness_error(&pred, &gold).unwrap(), 0.25);
        assert!(relatedness_error(&pred[..3], &gold).is_err());
    }

    #[test]
    fn weighted_accuracy_hand_values() {
        assert_eq!(weighted_accuracy(&[Unrelated], &[Unrelated]).unwrap(), 1.0);
        assert_eq!(weighted_accuracy(&[Discuss], &[Agree]).unwrap(), 0.25);
        let gold = [Agree, Disagree, Discuss, Unrelated];
        assert_eq!(weighted_accuracy(&gold, &gold).unwrap(), 1.0);
        assert!(weighted_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn weighted_accuracy_ten_pair_fixture() {
        // 4 related, 6 unrelated gold pairs; everything predicted unrelated
        let gold = [
            Agree, Unrelated, Discuss, Unrelated, Unrelated, Disagree, Unrelated, Discuss, Unrelated, Unrelated,
        ];
        let pred = [Unrelated; 10];
        // score 6 × 0.25 = 1.5; max 10 × 0.25 + 4 × 0.75 = 5.5
        assert_eq!(weighted_accuracy(&pred, &gold).unwrap(), 1.5 / 5.5);
    }

    #[test]
    fn controversial_needs_both_sides() {
        assert!(!is_controversial([Discuss, Discuss]));
        assert!(!is_controversial([Agree, Discuss, Unrelated]));
        assert!(is_controversial([Agree, Unrelated, Disagree]));
    }
}
