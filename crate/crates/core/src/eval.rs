//! Ranking metrics.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("AUC needs at least one positive and one negative label ({n_pos} positive, {n_neg} negative)")]
    DegenerateLabels { n_pos: usize, n_neg: usize },
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score at position {0} is NaN")]
    NanScore(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocResult {
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// positive-negative pairs ranked correctly, ties counting one half.
pub fn auc_roc<T: Real>(scores: &[T], labels: &[bool]) -> Result<RocResult, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EvalError::NanScore(i));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::DegenerateLabels { n_pos, n_neg });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));
    // sum of midranks (1-based) of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k]).count();
        rank_sum += midrank * tied_pos as f64;
        i = j;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(RocResult {
        auc: u / (p * n),
        n_pos,
        n_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated() {
        let r = auc_roc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!((r.n_pos, r.n_neg), (2, 2));
    }

    #[test]
    fn all_tied() {
        let r = auc_roc(&[0.3; 5], &[true, false, true, false, false]).unwrap();
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn four_pairs() {
        let r = auc_roc(&[0.9, 0.4, 0.6, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(r.auc, 0.75);
    }

    #[test]
    fn degenerate() {
        assert_eq!(
            auc_roc(&[0.1, 0.2], &[true, true]),
            Err(EvalError::DegenerateLabels { n_pos: 2, n_neg: 0 })
        );
    }
}
