//! Binary classification metrics over scored pairs.

use crate::error::{EvoPathError, Result};

fn check_inputs(labels: &[bool], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(EvoPathError::Eval(format!(
            "{} labels vs {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvoPathError::Eval(
            "both classes required to compute ranking metrics".into(),
        ));
    }
    Ok((positives, negatives))
}

/// Area under the ROC curve via the rank-sum statistic with average ranks
/// for tied scores (each tied positive-negative pair counts one half).
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    let (positives, negatives) = check_inputs(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; a tie group shares the average rank.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }

    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: precision-weighted recall increments over the
/// score-sorted list, with equal scores processed as one group.
pub fn average_precision(labels: &[bool], scores: &[f64]) -> Result<f64> {
    let (positives, _) = check_inputs(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut ap = 0.0f64;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_tp = 0usize;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                group_tp += 1;
            }
            j += 1;
        }
        tp += group_tp;
        seen += j - i;
        let precision = tp as f64 / seen as f64;
        let recall_increment = group_tp as f64 / positives as f64;
        ap += precision * recall_increment;
        i = j;
    }
    Ok(ap)
}
