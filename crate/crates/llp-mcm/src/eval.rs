//! Evaluation metrics: balanced error rate, rank-based ROC/AUC, the
//! empirical proportion risk, and the analytic demonstration that
//! proportion matching is not BER-optimal.
//!
//! Sign convention: `sign(0) = +1`, i.e. a score of exactly zero counts
//! as a positive prediction.

use crate::bags::Bag;
use crate::model::DecisionFunction;
use crate::{Error, Result};

/// Instances with ground-truth labels, available in simulation and in
/// benchmark test splits.
#[derive(Debug, Clone)]
pub struct LabeledTestSet {
    instances: Vec<Vec<f64>>,
    labels: Vec<i8>,
}

impl LabeledTestSet {
    pub fn new(instances: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<LabeledTestSet> {
        if instances.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: instances.len(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
        }
        Ok(LabeledTestSet { instances, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn instances(&self) -> &[Vec<f64>] {
        &self.instances
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }
}

fn check_both_classes(labels: &[i8]) -> Result<()> {
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InvalidParameter(
            "both classes must be present for BER/AUC".into(),
        ));
    }
    Ok(())
}

/// Balanced error rate of thresholded scores:
/// `1/2 (error rate on positives) + 1/2 (error rate on negatives)`.
pub fn ber_from_scores(scores: &[f64], labels: &[i8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    check_both_classes(labels)?;
    let (mut pos, mut pos_wrong, mut neg, mut neg_wrong) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        let predicted_positive = s >= 0.0;
        if y == 1 {
            pos += 1;
            if !predicted_positive {
                pos_wrong += 1;
            }
        } else {
            neg += 1;
            if predicted_positive {
                neg_wrong += 1;
            }
        }
    }
    Ok(0.5 * pos_wrong as f64 / pos as f64 + 0.5 * neg_wrong as f64 / neg as f64)
}

/// Balanced error rate of a decision function on a labeled test set.
pub fn ber(f: &DecisionFunction, test: &LabeledTestSet) -> Result<f64> {
    let scores = f.evaluate_batch(test.instances())?;
    ber_from_scores(&scores, test.labels())
}

/// Area under the ROC curve by rank statistics: the fraction of
/// (positive, negative) pairs ordered correctly, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[i8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    check_both_classes(labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // rank-sum with average ranks over tied groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }

    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let u = rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}

/// One point of the threshold-swept ROC curve, with the convention that a
/// score at or above the threshold predicts positive.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points at every distinct score, from the strictest threshold down.
pub fn roc_points(scores: &[f64], labels: &[i8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    check_both_classes(labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint { threshold, fpr: fp / n_neg, tpr: tp / n_pos });
    }
    Ok(points)
}

/// Empirical proportion risk: the mean `|predicted positive fraction -
/// observed proportion|^p` over bags. Zero exactly when every bag's
/// proportion is reproduced.
pub fn epr(f: &DecisionFunction, bags: &[Bag], p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::InvalidParameter(format!("EPR exponent must be positive, got {p}")));
    }
    if bags.is_empty() {
        return Err(Error::EmptyInput("bags"));
    }
    let mut total = 0.0;
    for bag in bags {
        let scores = f.evaluate_batch(bag.instances())?;
        let predicted = scores.iter().filter(|&&s| s >= 0.0).count() as f64
            / bag.len() as f64;
        total += (predicted - bag.lp_hat()).abs().powf(p);
    }
    Ok(total / bags.len() as f64)
}

/// Outcome of the proportion-matching failure demo.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EprDemoReport {
    /// Threshold minimizing the population proportion risk.
    pub t_epr: f64,
    /// Threshold minimizing the population BER.
    pub t_ber: f64,
    pub ber_at_t_epr: f64,
    pub ber_at_t_ber: f64,
}

/// Population BER of the threshold classifier `sign(x - t)` when the
/// negatives are uniform on `[0, 1]` and the positives have density `2x`.
pub fn demo_ber(t: f64) -> f64 {
    0.5 * t * t + 0.5 * (1.0 - t)
}

/// Minimizes population EPR and BER over thresholds in `[0, 1]` for the
/// uniform-vs-triangular pair with label proportion 1/2.
///
/// The EPR minimizer is the median of the feature marginal, `(sqrt 5 - 1)/2
/// ~ 0.618`, not the BER-optimal threshold `1/2`: matching the observed
/// proportion exactly still yields a suboptimal classifier.
pub fn epr_counterexample() -> EprDemoReport {
    // marginal CDF of X under the half/half mixture is (t + t^2)/2
    let epr_objective = |t: f64| {
        let predicted_positive = 1.0 - (t + t * t) / 2.0;
        (predicted_positive - 0.5).abs()
    };

    let argmin = |f: &dyn Fn(f64) -> f64| {
        let steps = 100_000;
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let v = f(t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        best_t
    };

    let t_epr = argmin(&epr_objective);
    let t_ber = argmin(&demo_ber);
    EprDemoReport {
        t_epr,
        t_ber,
        ber_at_t_epr: demo_ber(t_epr),
        ber_at_t_ber: demo_ber(t_ber),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KernelConfig;
    use rand::Rng;

    #[test]
    fn ber_examples() {
        // perfect classifier
        assert_eq!(ber_from_scores(&[1.0, 2.0, -1.0, -0.5], &[1, 1, -1, -1]).unwrap(), 0.0);
        // constant positive classifier gets every negative wrong
        assert_eq!(ber_from_scores(&[1.0, 1.0, 1.0, 1.0], &[1, 1, -1, -1]).unwrap(), 0.5);
        // one of two positives wrong, negatives right
        assert_eq!(ber_from_scores(&[1.0, -1.0, -1.0, -1.0], &[1, 1, -1, -1]).unwrap(), 0.25);
        // zero scores count as positive predictions: the negative is wrong
        assert_eq!(ber_from_scores(&[0.0, 0.0], &[1, -1]).unwrap(), 0.5);

        assert!(ber_from_scores(&[1.0, 2.0], &[1, 1]).is_err());
    }

    #[test]
    fn ber_complement_under_sign_swap() {
        let mut rng = crate::seed::rng(61);
        for _ in 0..50 {
            let n = rng.gen_range(4..40);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut labels: Vec<i8> = (0..n).map(|_| if rng.gen() { 1 } else { -1 }).collect();
            labels[0] = 1;
            labels[1] = -1;
            let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
            if scores.contains(&0.0) {
                continue;
            }
            let b = ber_from_scores(&scores, &labels).unwrap();
            let b_flipped = ber_from_scores(&flipped, &labels).unwrap();
            assert!((b + b_flipped - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3, 0.1], &[1, 1, -1, -1]).unwrap(), 1.0);
        // 3 of 4 pairs ordered correctly
        assert_eq!(roc_auc(&[0.9, 0.2, 0.5, 0.1], &[1, 1, -1, -1]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.4, 0.4, 0.4], &[1, -1, -1]).unwrap(), 0.5);
    }

    proptest::proptest! {
        #[test]
        fn auc_is_invariant_under_monotone_transforms(
            points in proptest::collection::vec((-3.0..3.0f64, proptest::prelude::any::<bool>()), 4..60),
        ) {
            let scores: Vec<f64> = points.iter().map(|(s, _)| *s).collect();
            let mut labels: Vec<i8> =
                points.iter().map(|(_, l)| if *l { 1 } else { -1 }).collect();
            labels[0] = 1;
            labels[1] = -1;
            let base = roc_auc(&scores, &labels).unwrap();
            let exp_scores: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s + 11.0).collect();
            proptest::prop_assert_eq!(roc_auc(&exp_scores, &labels).unwrap(), base);
            proptest::prop_assert_eq!(roc_auc(&affine, &labels).unwrap(), base);
        }
    }

    #[test]
    fn roc_points_cover_the_sweep() {
        let points = roc_points(&[0.9, 0.2, 0.5, 0.1], &[1, 1, -1, -1]).unwrap();
        assert_eq!(points.len(), 4);
        assert_eq!((points[0].fpr, points[0].tpr), (0.0, 0.5));
        assert_eq!((points[3].fpr, points[3].tpr), (1.0, 1.0));
    }

    #[test]
    fn epr_examples() {
        // the zero function predicts everything positive (sign(0) = +1)
        let cfg = KernelConfig::new(0.01).unwrap();
        let f = DecisionFunction::new(cfg, &[vec![0.5]], vec![0.0]).unwrap();
        let bag = Bag::from_labeled(vec![vec![0.2], vec![0.8]], vec![1, -1], None).unwrap();
        let value = epr(&f, std::slice::from_ref(&bag), 1.0).unwrap();
        assert!((value - 0.5).abs() < 1e-15);
        let squared = epr(&f, &[bag], 2.0).unwrap();
        assert!((squared - 0.25).abs() < 1e-15);

        // a classifier reproducing every proportion scores zero
        let cfg = KernelConfig::new(1.0).unwrap();
        let g = DecisionFunction::new(cfg, &[vec![0.0]], vec![-1.0]).unwrap();
        // g(x) = -k(x, 0) < 0 everywhere: all predicted negative
        let all_neg = Bag::from_labeled(vec![vec![0.3], vec![0.6]], vec![-1, -1], None).unwrap();
        assert_eq!(epr(&g, &[all_neg], 1.0).unwrap(), 0.0);

        let bag = Bag::from_labeled(vec![vec![0.0]], vec![1], None).unwrap();
        assert!(epr(&g, &[bag], 0.0).is_err());
    }

    #[test]
    fn counterexample_matches_the_analysis() {
        let report = epr_counterexample();
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        assert!((report.t_epr - golden).abs() < 1e-3, "t_epr {}", report.t_epr);
        assert!((report.t_ber - 0.5).abs() < 1e-3, "t_ber {}", report.t_ber);
        assert!((report.ber_at_t_ber - 0.375).abs() < 1e-6);
        assert!((report.ber_at_t_epr - 0.381966).abs() < 1e-5);
        // proportion matching picks a strictly worse threshold
        assert!(report.t_epr > report.t_ber);
        assert!(report.ber_at_t_epr > report.ber_at_t_ber);
    }
}
