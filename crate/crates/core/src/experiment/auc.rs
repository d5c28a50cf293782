use alloc::vec::Vec;

use crate::data::Sample;
use crate::model::Predictions;
use crate::{Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::dim("auc", (scores.len(), 1), (labels.len(), 1)));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs at least one positive and one negative"));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve by sorting: the fraction of (positive, negative)
/// pairs ranked correctly, ties counted one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the number of correctly ordered pairs, kept integral
    let mut twice_correct: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let (mut p, mut n) = (0u64, 0u64);
        while end < order.len() && scores[order[end]].total_cmp(&scores[order[start]]).is_eq() {
            if labels[order[end]] == 1 {
                p += 1;
            } else {
                n += 1;
            }
            end += 1;
        }
        twice_correct += 2 * p * negatives_below + p * n;
        negatives_below += n;
        start = end;
    }
    Ok(twice_correct as f64 / (2 * pos * neg) as f64)
}

/// Direct O(n²) pair count, kept as a cross-check for [`auc`].
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut twice_correct: u64 = 0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] == 1 {
                continue;
            }
            twice_correct += match si.total_cmp(&sj) {
                core::cmp::Ordering::Greater => 2,
                core::cmp::Ordering::Equal => 1,
                core::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(twice_correct as f64 / (2 * pos * neg) as f64)
}

/// Post-click CVR AUC: `ẑ` against `z` over clicked samples only.
pub fn cvr_auc(pred: &Predictions, samples: &[Sample]) -> Result<f64> {
    let (scores, labels): (Vec<f64>, Vec<u8>) = pred
        .z_hat
        .iter()
        .zip(samples)
        .filter(|(_, s)| s.clicked())
        .map(|(&z, s)| (z, s.conversion()))
        .unzip();
    auc(&scores, &labels)
}

/// pCTCVR AUC: `ŷ·ẑ` against `y·z` over all impressions.
pub fn ctcvr_auc(pred: &Predictions, samples: &[Sample]) -> Result<f64> {
    let labels: Vec<u8> = samples.iter().map(Sample::conversion).collect();
    auc(&pred.ctcvr(), &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn examples() {
        assert_eq!(auc(&[0.9, 0.3, 0.6], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.9], &[1, 0]).unwrap(), 0.0);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn matches_pairwise_on_random_inputs() {
        let mut r = rng::stream(5, "auc");
        for _ in 0..50 {
            let n = 200;
            // coarse scores to force ties
            let scores: Vec<f64> = (0..n).map(|_| f64::from(r.gen_range(0..20u8)) / 20.0).collect();
            let labels: Vec<u8> = (0..n).map(|_| u8::from(r.gen_bool(0.3))).collect();
            assert_eq!(auc(&scores, &labels).unwrap(), pairwise_auc(&scores, &labels).unwrap());
        }
    }

    proptest! {
        #[test]
        fn bounded_and_flip_symmetric(scores in proptest::collection::vec(-5.0f64..5.0, 2..60), seed in 0u64..1000) {
            let mut r = rng::stream(seed, "auc");
            let mut labels: Vec<u8> = scores.iter().map(|_| u8::from(r.gen_bool(0.5))).collect();
            labels[0] = 1;
            labels[1] = 0;
            let a = auc(&scores, &labels).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
            let b = auc(&scores, &flipped).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
